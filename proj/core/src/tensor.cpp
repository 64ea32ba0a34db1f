#include "seqrec/tensor.hpp"

#include <cmath>
#include <sstream>

namespace seqrec {

int64_t shape_size(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_size(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    Tensor t;
    t.data.assign(static_cast<size_t>(shape_size(shape)), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    Tensor t;
    t.data.assign(static_cast<size_t>(shape_size(shape)), value);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::require_finite(const std::string& context) const {
    if (!all_finite()) throw std::runtime_error("non-finite value in " + context);
}

}  // namespace seqrec

#include "seqrec/ops.hpp"

#include <algorithm>
#include <cmath>

namespace seqrec {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = sigmoid(v);
    return out;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, RngStream& rng) {
    if (!mu.same_shape(sigma))
        throw std::invalid_argument("reparameterize: mu " + shape_str(mu.shape) +
                                    " vs sigma " + shape_str(sigma.shape));
    bool all_zero = true;
    for (double s : sigma.data) {
        if (s < 0.0) throw std::invalid_argument("reparameterize: negative sigma entry");
        if (s != 0.0) all_zero = false;
    }
    if (all_zero) return mu;
    Tensor out = mu;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] += rng.normal() * sigma.data[i];
    return out;
}

}  // namespace seqrec

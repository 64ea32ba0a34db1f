#include "seqrec/adam.hpp"

#include <cmath>

namespace seqrec {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               double weight_decay) {
    if (!param.same_shape(grad))
        throw std::invalid_argument("adam_step: grad shape " + shape_str(grad.shape) +
                                    " does not match param " + shape_str(param.shape));
    if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("adam_step: weight_decay must be >= 0");
    if (state.step == 0) {
        state.m = Tensor::zeros(param.shape);
        state.v = Tensor::zeros(param.shape);
    }
    if (!state.m.same_shape(param))
        throw std::invalid_argument("adam_step: state shape mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (int64_t i = 0; i < param.size(); ++i) {
        double g = grad.data[i] + weight_decay * param.data[i];
        state.m.data[i] = kAdamBeta1 * state.m.data[i] + (1.0 - kAdamBeta1) * g;
        state.v.data[i] = kAdamBeta2 * state.v.data[i] + (1.0 - kAdamBeta2) * g * g;
        double mhat = state.m.data[i] / bc1;
        double vhat = state.v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

Tensor& ParameterStore::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(init), {}});
    return entries_.back().value;
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second];
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second];
}

}  // namespace seqrec

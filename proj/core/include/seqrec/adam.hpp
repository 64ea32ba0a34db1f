#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "seqrec/tensor.hpp"

namespace seqrec {

// Per-parameter Adam accumulators.
struct AdamState {
    Tensor m;
    Tensor v;
    int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Standard Adam with bias correction. Weight decay enters as an additive
// L2 gradient term (grad + weight_decay * param), not decoupled decay.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               double weight_decay);

// Named, deterministically ordered parameter set with attached optimizer
// state. Iteration order is registration order.
class ParameterStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        AdamState opt;
    };

    Tensor& add(const std::string& name, Tensor init);
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace seqrec

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seqrec/tensor.hpp"

namespace seqrec {

// Seeded random stream. mt19937_64 is fully specified by the standard and the
// uniform/normal transforms below avoid the implementation-defined stdlib
// distributions, so identical seeds give identical streams on every platform.
class RngStream {
  public:
    explicit RngStream(uint64_t seed) : seed_(seed), engine_(seed) {}

    uint64_t seed() const { return seed_; }

    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi);
    // Standard normal via Box-Muller.
    double normal();

    Tensor normal_tensor(std::vector<int64_t> shape, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream for a named component, derived from this stream's
    // seed. Stable across runs and across component registration order.
    RngStream derive(const std::string& component) const;

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace seqrec

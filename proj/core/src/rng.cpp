#include "seqrec/rng.hpp"

#include <cmath>

namespace seqrec {

double RngStream::uniform() {
    // 53 random bits -> double in [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    // Rejection sampling for an unbiased draw.
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % range);
}

double RngStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

Tensor RngStream::normal_tensor(std::vector<int64_t> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = normal() * stddev;
    return t;
}

RngStream RngStream::derive(const std::string& component) const {
    // FNV-1a over the component name, mixed with the base seed.
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : component) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return RngStream(seed_ ^ h);
}

}  // namespace seqrec

#pragma once

#include "seqrec/rng.hpp"
#include "seqrec/tensor.hpp"

namespace seqrec {

// Elementwise logistic sigmoid 1/(1+e^-x). Saturates to 0/1, never NaN.
Tensor sigmoid(const Tensor& x);
double sigmoid(double x);

// Elementwise ln(1+e^x), overflow-safe.
double softplus(double x);

// t = mu + eps (.) sigma with eps ~ N(0, I) drawn from rng. sigma must be
// elementwise >= 0; an all-zero sigma returns mu without consuming rng draws,
// so the deterministic path leaves the stream untouched.
Tensor reparameterize(const Tensor& mu, const Tensor& sigma, RngStream& rng);

}  // namespace seqrec

#pragma once

#include <functional>
#include <vector>

#include "seqrec/tensor.hpp"

namespace seqrec {

// Define-by-run reverse-mode tape. A Graph is built fresh for every batch,
// holds the forward values, and on backward() fills per-node gradients.
//
// Node ids are indices into the tape; shapes are validated at op creation.
class Graph {
  public:
    using Var = int;

    // Leaves. `constant` never receives a gradient.
    Var input(Tensor value);
    Var constant(Tensor value);

    // Elementwise, same shape.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    // alpha * a + beta, elementwise.
    Var affine(Var a, double alpha, double beta);
    Var scale(Var a, double alpha) { return affine(a, alpha, 0.0); }
    // Elementwise product with a constant tensor (masking, noise injection).
    Var mul_const(Var a, const Tensor& c);

    Var sigmoid(Var a);
    Var tanh_(Var a);
    Var relu(Var a);
    Var softplus(Var a);
    Var log_(Var a);
    Var square(Var a);

    // (N,K) x (K,M) -> (N,M)
    Var matmul(Var a, Var b);
    // (N,K) x (M,K)^T -> (N,M)
    Var matmul_nt(Var a, Var b);
    // a: (N,d), bias: (1,d) broadcast over rows.
    Var add_bias(Var a, Var bias);
    // Per-row dot product of two (N,d) tensors -> (N,1).
    Var row_dot(Var a, Var b);
    // Select rows of `table` (V,d) by index -> (N,d); backward scatter-adds.
    Var gather_rows(Var table, std::vector<int64_t> indices);
    Var concat_cols(Var a, Var b);

    Var sum(Var a);
    Var mean(Var a);

    // Row-wise softmax of (N,M) after adding `mask` (0 or -inf entries).
    Var softmax_rows(Var a, const Tensor& mask);

    // Multi-head attention helpers over B sequences of length n, model dim
    // d = heads * dh. q,k,v are (B*n, d); scores are (B*heads*n, n) scaled
    // by 1/sqrt(dh); apply maps probabilities back to (B*n, d).
    Var attn_scores(Var q, Var k, int64_t batch, int64_t n, int64_t heads);
    Var attn_apply(Var probs, Var v, int64_t batch, int64_t n, int64_t heads);

    // Value passes through, gradient does not.
    Var detach(Var a);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v)].grad; }
    bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v)].requires_grad; }

    // Reverse pass from a scalar loss. Gradients of leaves that the loss does
    // not reach stay zero. Throws on non-scalar loss or non-finite values.
    void backward(Var loss);

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void()> backfn;  // empty for leaves
    };

    Var emplace(Tensor value, bool requires_grad, std::function<void()> backfn);
    Tensor& grad_mut(Var v) { return nodes_[static_cast<size_t>(v)].grad; }

    std::vector<Node> nodes_;
};

}  // namespace seqrec

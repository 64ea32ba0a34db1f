#include "seqrec/graph.hpp"

#include <cmath>
#include <limits>

namespace seqrec {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

Graph::Var Graph::emplace(Tensor value, bool requires_grad, std::function<void()> backfn) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backfn = std::move(backfn);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
}

Graph::Var Graph::input(Tensor value) { return emplace(std::move(value), true, {}); }

Graph::Var Graph::constant(Tensor value) { return emplace(std::move(value), false, {}); }

Graph::Var Graph::add(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
        throw std::invalid_argument("add: shape mismatch " + shape_str(va.shape) + " vs " +
                                    shape_str(vb.shape));
    Tensor out = va;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
    bool rg = requires_grad(a) || requires_grad(b);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, b, r] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            Tensor& ga = grad_mut(a);
            for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (requires_grad(b)) {
            Tensor& gb = grad_mut(b);
            for (int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
        }
    };
    return r;
}

Graph::Var Graph::sub(Var a, Var b) { return add(a, affine(b, -1.0, 0.0)); }

Graph::Var Graph::mul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
        throw std::invalid_argument("mul: shape mismatch " + shape_str(va.shape) + " vs " +
                                    shape_str(vb.shape));
    Tensor out = va;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
    bool rg = requires_grad(a) || requires_grad(b);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, b, r] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            Tensor& ga = grad_mut(a);
            const Tensor& vb2 = value(b);
            for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * vb2.data[i];
        }
        if (requires_grad(b)) {
            Tensor& gb = grad_mut(b);
            const Tensor& va2 = value(a);
            for (int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * va2.data[i];
        }
    };
    return r;
}

Graph::Var Graph::affine(Var a, double alpha, double beta) {
    Tensor out = value(a);
    for (double& v : out.data) v = alpha * v + beta;
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r, alpha] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += alpha * g.data[i];
    };
    return r;
}

Graph::Var Graph::mul_const(Var a, const Tensor& c) {
    const Tensor& va = value(a);
    if (!va.same_shape(c))
        throw std::invalid_argument("mul_const: shape mismatch " + shape_str(va.shape) + " vs " +
                                    shape_str(c.shape));
    Tensor out = va;
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= c.data[i];
    Var cv = constant(c);
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, cv, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& c2 = value(cv);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * c2.data[i];
    };
    return r;
}

Graph::Var Graph::sigmoid(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = stable_sigmoid(v);
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& y = value(r);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i)
            ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    };
    return r;
}

Graph::Var Graph::tanh_(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::tanh(v);
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& y = value(r);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i)
            ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    };
    return r;
}

Graph::Var Graph::relu(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& x = value(a);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i)
            if (x.data[i] > 0.0) ga.data[i] += g.data[i];
    };
    return r;
}

Graph::Var Graph::softplus(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = stable_softplus(v);
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& x = value(a);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i)
            ga.data[i] += g.data[i] * stable_sigmoid(x.data[i]);
    };
    return r;
}

Graph::Var Graph::log_(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::log(v);
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& x = value(a);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / x.data[i];
    };
    return r;
}

Graph::Var Graph::square(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = v * v;
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& x = value(a);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += 2.0 * g.data[i] * x.data[i];
    };
    return r;
}

Graph::Var Graph::matmul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.shape.size() != 2 || vb.shape.size() != 2 || va.shape[1] != vb.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(va.shape) + " x " +
                                    shape_str(vb.shape));
    int64_t N = va.shape[0], K = va.shape[1], M = vb.shape[1];
    Tensor out = Tensor::zeros({N, M});
    for (int64_t i = 0; i < N; ++i)
        for (int64_t k = 0; k < K; ++k) {
            double aik = va.data[i * K + k];
            if (aik == 0.0) continue;
            const double* brow = &vb.data[k * M];
            double* orow = &out.data[i * M];
            for (int64_t j = 0; j < M; ++j) orow[j] += aik * brow[j];
        }
    bool rg = requires_grad(a) || requires_grad(b);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, b, r, N, K, M] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            // dA = dC * B^T
            const Tensor& vb2 = value(b);
            Tensor& ga = grad_mut(a);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t k = 0; k < K; ++k) {
                    double acc = 0.0;
                    const double* grow = &g.data[i * M];
                    const double* brow = &vb2.data[k * M];
                    for (int64_t j = 0; j < M; ++j) acc += grow[j] * brow[j];
                    ga.data[i * K + k] += acc;
                }
        }
        if (requires_grad(b)) {
            // dB = A^T * dC
            const Tensor& va2 = value(a);
            Tensor& gb = grad_mut(b);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t k = 0; k < K; ++k) {
                    double aik = va2.data[i * K + k];
                    if (aik == 0.0) continue;
                    const double* grow = &g.data[i * M];
                    double* gbrow = &gb.data[k * M];
                    for (int64_t j = 0; j < M; ++j) gbrow[j] += aik * grow[j];
                }
        }
    };
    return r;
}

Graph::Var Graph::matmul_nt(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.shape.size() != 2 || vb.shape.size() != 2 || va.shape[1] != vb.shape[1])
        throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(va.shape) +
                                    " x " + shape_str(vb.shape) + "^T");
    int64_t N = va.shape[0], K = va.shape[1], M = vb.shape[0];
    Tensor out = Tensor::zeros({N, M});
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < M; ++j) {
            double acc = 0.0;
            const double* arow = &va.data[i * K];
            const double* brow = &vb.data[j * K];
            for (int64_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
            out.data[i * M + j] = acc;
        }
    bool rg = requires_grad(a) || requires_grad(b);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, b, r, N, K, M] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            // dA = dC * B
            const Tensor& vb2 = value(b);
            Tensor& ga = grad_mut(a);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < M; ++j) {
                    double gij = g.data[i * M + j];
                    if (gij == 0.0) continue;
                    const double* brow = &vb2.data[j * K];
                    double* garow = &ga.data[i * K];
                    for (int64_t k = 0; k < K; ++k) garow[k] += gij * brow[k];
                }
        }
        if (requires_grad(b)) {
            // dB = dC^T * A
            const Tensor& va2 = value(a);
            Tensor& gb = grad_mut(b);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < M; ++j) {
                    double gij = g.data[i * M + j];
                    if (gij == 0.0) continue;
                    const double* arow = &va2.data[i * K];
                    double* gbrow = &gb.data[j * K];
                    for (int64_t k = 0; k < K; ++k) gbrow[k] += gij * arow[k];
                }
        }
    };
    return r;
}

Graph::Var Graph::add_bias(Var a, Var bias) {
    const Tensor& va = value(a);
    const Tensor& vb = value(bias);
    if (va.shape.size() != 2 || vb.size() != va.shape[1])
        throw std::invalid_argument("add_bias: shape mismatch " + shape_str(va.shape) + " + " +
                                    shape_str(vb.shape));
    int64_t N = va.shape[0], D = va.shape[1];
    Tensor out = va;
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < D; ++j) out.data[i * D + j] += vb.data[j];
    bool rg = requires_grad(a) || requires_grad(bias);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, bias, r, N, D] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            Tensor& ga = grad_mut(a);
            for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (requires_grad(bias)) {
            Tensor& gb = grad_mut(bias);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < D; ++j) gb.data[j] += g.data[i * D + j];
        }
    };
    return r;
}

Graph::Var Graph::row_dot(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb) || va.shape.size() != 2)
        throw std::invalid_argument("row_dot: shape mismatch " + shape_str(va.shape) + " vs " +
                                    shape_str(vb.shape));
    int64_t N = va.shape[0], D = va.shape[1];
    Tensor out = Tensor::zeros({N, 1});
    for (int64_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < D; ++j) acc += va.data[i * D + j] * vb.data[i * D + j];
        out.data[i] = acc;
    }
    bool rg = requires_grad(a) || requires_grad(b);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, b, r, N, D] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            const Tensor& vb2 = value(b);
            Tensor& ga = grad_mut(a);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < D; ++j) ga.data[i * D + j] += g.data[i] * vb2.data[i * D + j];
        }
        if (requires_grad(b)) {
            const Tensor& va2 = value(a);
            Tensor& gb = grad_mut(b);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < D; ++j) gb.data[i * D + j] += g.data[i] * va2.data[i * D + j];
        }
    };
    return r;
}

Graph::Var Graph::gather_rows(Var table, std::vector<int64_t> indices) {
    const Tensor& vt = value(table);
    if (vt.shape.size() != 2)
        throw std::invalid_argument("gather_rows: table must be 2-d, got " + shape_str(vt.shape));
    int64_t V = vt.shape[0], D = vt.shape[1];
    int64_t N = static_cast<int64_t>(indices.size());
    Tensor out = Tensor::zeros({N, D});
    for (int64_t i = 0; i < N; ++i) {
        int64_t row = indices[static_cast<size_t>(i)];
        if (row < 0 || row >= V)
            throw std::out_of_range("gather_rows: index " + std::to_string(row) +
                                    " out of range for table " + shape_str(vt.shape));
        for (int64_t j = 0; j < D; ++j) out.data[i * D + j] = vt.data[row * D + j];
    }
    Var r = emplace(std::move(out), requires_grad(table), {});
    nodes_.back().backfn = [this, table, r, idx = std::move(indices), D] {
        if (!requires_grad(table)) return;
        const Tensor& g = grad(r);
        Tensor& gt = grad_mut(table);
        for (size_t i = 0; i < idx.size(); ++i) {
            int64_t row = idx[i];
            for (int64_t j = 0; j < D; ++j)
                gt.data[row * D + j] += g.data[static_cast<int64_t>(i) * D + j];
        }
    };
    return r;
}

Graph::Var Graph::concat_cols(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.shape.size() != 2 || vb.shape.size() != 2 || va.shape[0] != vb.shape[0])
        throw std::invalid_argument("concat_cols: shape mismatch " + shape_str(va.shape) + " | " +
                                    shape_str(vb.shape));
    int64_t N = va.shape[0], P = va.shape[1], Q = vb.shape[1];
    Tensor out = Tensor::zeros({N, P + Q});
    for (int64_t i = 0; i < N; ++i) {
        for (int64_t j = 0; j < P; ++j) out.data[i * (P + Q) + j] = va.data[i * P + j];
        for (int64_t j = 0; j < Q; ++j) out.data[i * (P + Q) + P + j] = vb.data[i * Q + j];
    }
    bool rg = requires_grad(a) || requires_grad(b);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, a, b, r, N, P, Q] {
        const Tensor& g = grad(r);
        if (requires_grad(a)) {
            Tensor& ga = grad_mut(a);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < P; ++j) ga.data[i * P + j] += g.data[i * (P + Q) + j];
        }
        if (requires_grad(b)) {
            Tensor& gb = grad_mut(b);
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < Q; ++j) gb.data[i * Q + j] += g.data[i * (P + Q) + P + j];
        }
    };
    return r;
}

Graph::Var Graph::sum(Var a) {
    double acc = 0.0;
    for (double v : value(a).data) acc += v;
    Var r = emplace(Tensor::scalar(acc), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r] {
        if (!requires_grad(a)) return;
        double g = grad(r).data[0];
        Tensor& ga = grad_mut(a);
        for (double& v : ga.data) v += g;
    };
    return r;
}

Graph::Var Graph::mean(Var a) {
    int64_t n = value(a).size();
    if (n == 0) throw std::invalid_argument("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Graph::Var Graph::softmax_rows(Var a, const Tensor& mask) {
    const Tensor& va = value(a);
    if (!va.same_shape(mask))
        throw std::invalid_argument("softmax_rows: mask shape mismatch " + shape_str(va.shape) +
                                    " vs " + shape_str(mask.shape));
    int64_t N = va.shape[0], M = va.shape[1];
    Tensor out = Tensor::zeros({N, M});
    for (int64_t i = 0; i < N; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < M; ++j) {
            double v = va.data[i * M + j] + mask.data[i * M + j];
            if (v > mx) mx = v;
        }
        if (!std::isfinite(mx)) continue;  // fully masked row -> all-zero probs
        double z = 0.0;
        for (int64_t j = 0; j < M; ++j) {
            double v = va.data[i * M + j] + mask.data[i * M + j];
            double e = std::isfinite(v) ? std::exp(v - mx) : 0.0;
            out.data[i * M + j] = e;
            z += e;
        }
        for (int64_t j = 0; j < M; ++j) out.data[i * M + j] /= z;
    }
    Var r = emplace(std::move(out), requires_grad(a), {});
    nodes_.back().backfn = [this, a, r, N, M] {
        if (!requires_grad(a)) return;
        const Tensor& g = grad(r);
        const Tensor& p = value(r);
        Tensor& ga = grad_mut(a);
        for (int64_t i = 0; i < N; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < M; ++j) dot += g.data[i * M + j] * p.data[i * M + j];
            for (int64_t j = 0; j < M; ++j)
                ga.data[i * M + j] += p.data[i * M + j] * (g.data[i * M + j] - dot);
        }
    };
    return r;
}

Graph::Var Graph::attn_scores(Var q, Var k, int64_t batch, int64_t n, int64_t heads) {
    const Tensor& vq = value(q);
    const Tensor& vk = value(k);
    if (!vq.same_shape(vk) || vq.shape.size() != 2 || vq.shape[0] != batch * n ||
        vq.shape[1] % heads != 0)
        throw std::invalid_argument("attn_scores: bad shapes " + shape_str(vq.shape));
    int64_t dh = vq.shape[1] / heads;
    int64_t d = vq.shape[1];
    double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out = Tensor::zeros({batch * heads * n, n});
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t h = 0; h < heads; ++h)
            for (int64_t i = 0; i < n; ++i) {
                const double* qrow = &vq.data[(b * n + i) * d + h * dh];
                double* orow = &out.data[((b * heads + h) * n + i) * n];
                for (int64_t j = 0; j < n; ++j) {
                    const double* krow = &vk.data[(b * n + j) * d + h * dh];
                    double acc = 0.0;
                    for (int64_t c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
                    orow[j] = acc * inv;
                }
            }
    bool rg = requires_grad(q) || requires_grad(k);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, q, k, r, batch, n, heads, dh, d, inv] {
        const Tensor& g = grad(r);
        const Tensor& vq2 = value(q);
        const Tensor& vk2 = value(k);
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t i = 0; i < n; ++i) {
                    const double* grow = &g.data[((b * heads + h) * n + i) * n];
                    for (int64_t j = 0; j < n; ++j) {
                        double gij = grow[j] * inv;
                        if (gij == 0.0) continue;
                        if (requires_grad(q)) {
                            double* gq = &grad_mut(q).data[(b * n + i) * d + h * dh];
                            const double* krow = &vk2.data[(b * n + j) * d + h * dh];
                            for (int64_t c = 0; c < dh; ++c) gq[c] += gij * krow[c];
                        }
                        if (requires_grad(k)) {
                            double* gk = &grad_mut(k).data[(b * n + j) * d + h * dh];
                            const double* qrow = &vq2.data[(b * n + i) * d + h * dh];
                            for (int64_t c = 0; c < dh; ++c) gk[c] += gij * qrow[c];
                        }
                    }
                }
    };
    return r;
}

Graph::Var Graph::attn_apply(Var probs, Var v, int64_t batch, int64_t n, int64_t heads) {
    const Tensor& vp = value(probs);
    const Tensor& vv = value(v);
    if (vp.shape.size() != 2 || vp.shape[0] != batch * heads * n || vp.shape[1] != n ||
        vv.shape.size() != 2 || vv.shape[0] != batch * n || vv.shape[1] % heads != 0)
        throw std::invalid_argument("attn_apply: bad shapes " + shape_str(vp.shape) + " x " +
                                    shape_str(vv.shape));
    int64_t d = vv.shape[1];
    int64_t dh = d / heads;
    Tensor out = Tensor::zeros({batch * n, d});
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t h = 0; h < heads; ++h)
            for (int64_t i = 0; i < n; ++i) {
                const double* prow = &vp.data[((b * heads + h) * n + i) * n];
                double* orow = &out.data[(b * n + i) * d + h * dh];
                for (int64_t j = 0; j < n; ++j) {
                    double p = prow[j];
                    if (p == 0.0) continue;
                    const double* vrow = &vv.data[(b * n + j) * d + h * dh];
                    for (int64_t c = 0; c < dh; ++c) orow[c] += p * vrow[c];
                }
            }
    bool rg = requires_grad(probs) || requires_grad(v);
    Var r = emplace(std::move(out), rg, {});
    nodes_.back().backfn = [this, probs, v, r, batch, n, heads, dh, d] {
        const Tensor& g = grad(r);
        const Tensor& vp2 = value(probs);
        const Tensor& vv2 = value(v);
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t i = 0; i < n; ++i) {
                    const double* grow = &g.data[(b * n + i) * d + h * dh];
                    for (int64_t j = 0; j < n; ++j) {
                        const double* vrow = &vv2.data[(b * n + j) * d + h * dh];
                        if (requires_grad(probs)) {
                            double acc = 0.0;
                            for (int64_t c = 0; c < dh; ++c) acc += grow[c] * vrow[c];
                            grad_mut(probs).data[((b * heads + h) * n + i) * n + j] += acc;
                        }
                        if (requires_grad(v)) {
                            double p = vp2.data[((b * heads + h) * n + i) * n + j];
                            if (p == 0.0) continue;
                            double* gv = &grad_mut(v).data[(b * n + j) * d + h * dh];
                            for (int64_t c = 0; c < dh; ++c) gv[c] += p * grow[c];
                        }
                    }
                }
    };
    return r;
}

Graph::Var Graph::detach(Var a) { return constant(value(a)); }

void Graph::backward(Var loss) {
    const Tensor& lv = value(loss);
    if (lv.size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(lv.shape));
    if (!std::isfinite(lv.data[0])) throw std::runtime_error("backward: loss is non-finite");
    grad_mut(loss).data[0] = 1.0;
    for (int i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.requires_grad && n.backfn) {
            n.grad.require_finite("gradient during reverse pass");
            n.backfn();
        }
    }
}

}  // namespace seqrec

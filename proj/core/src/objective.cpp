#include "seqrec/objective.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "seqrec/errors.hpp"
#include "seqrec/ops.hpp"

namespace seqrec {

namespace {

Tensor flatten_row(const Tensor& mat, int64_t row) {
    int64_t d = mat.cols();
    Tensor out = Tensor::zeros({d});
    for (int64_t j = 0; j < d; ++j) out.data[j] = mat.at(row, j);
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

Tensor combined_rep(const DualRepresentation& reps, CombineRule rule, const Tensor* combine_w) {
    const Tensor& t = reps.adjustment.t;
    const Tensor& s = reps.confounder;
    if (!t.same_shape(s)) throw std::invalid_argument("t and s dimensions differ");
    if (rule == CombineRule::Sum) {
        Tensor out = t;
        for (int64_t i = 0; i < out.size(); ++i) out.data[i] += s.data[i];
        return out;
    }
    if (!combine_w) throw ConfigError("concat combination requires a projection matrix");
    int64_t d = t.size();
    if (combine_w->shape != std::vector<int64_t>{2 * d, d})
        throw std::invalid_argument("combine projection has wrong shape");
    Tensor out = Tensor::zeros({d});
    for (int64_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            acc += t.data[i] * combine_w->at(i, j);
            acc += s.data[i] * combine_w->at(d + i, j);
        }
        out.data[j] = acc;
    }
    return out;
}

}  // namespace

std::string LossWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
        throw ConfigError("loss weights must be non-negative");
    if (gamma > 1.0) throw ConfigError("gamma must be <= 1 (term (a) coefficient 1-gamma)");
    if (alpha > gamma)
        return "alpha > gamma: H(y|s) enters with a negative coefficient (" +
               std::to_string(gamma - alpha) + ")";
    return {};
}

StochasticEmbedding adjustment_forward(const Model& model, const SequenceExample& example,
                                       RngStream& rng, bool stochastic) {
    Graph g;
    GraphBinding bp = bind(g, model);
    Batch batch = make_batch(std::span(&example, 1), model.cfg);
    Graph::Var emb = embed_batch(g, bp, batch, model.cfg);
    Graph::Var h = encode_batch(g, bp, emb, batch, model.cfg, "adj.");
    StochasticEmbedding out;
    out.mu = flatten_row(g.value(h), 0);
    if (stochastic && model.cfg.stochastic) {
        Graph::Var sg =
            g.softplus(g.add_bias(g.matmul(h, bp.at("sigma.W")), bp.at("sigma.b")));
        out.sigma = flatten_row(g.value(sg), 0);
    } else {
        out.sigma = Tensor::zeros(out.mu.shape);
    }
    out.t = reparameterize(out.mu, out.sigma, rng);
    return out;
}

Tensor confounder_forward(const Model& model, const SequenceExample& example) {
    if (!model.cfg.confounder) throw ConfigError("model has no confounder encoder");
    Graph g;
    GraphBinding bp = bind(g, model);
    Batch batch = make_batch(std::span(&example, 1), model.cfg);
    Graph::Var emb = embed_batch(g, bp, batch, model.cfg);
    Graph::Var h = encode_batch(g, bp, emb, batch, model.cfg, "conf.");
    return flatten_row(g.value(h), 0);
}

double compression_term(const StochasticEmbedding& emb) {
    double mu2 = 0.0;
    for (double v : emb.mu.data) mu2 += v * v;
    bool all_zero = true, any_zero = false;
    for (double s : emb.sigma.data) {
        if (s < 0.0) throw std::invalid_argument("compression_term: negative sigma");
        if (s == 0.0)
            any_zero = true;
        else
            all_zero = false;
    }
    if (all_zero) return 0.5 * mu2;
    if (any_zero)
        throw std::invalid_argument(
            "compression_term: sigma contains an exact zero; log sigma^2 is undefined -- "
            "use deterministic mode (sigma identically zero) instead");
    double spread = 0.0;
    for (double s : emb.sigma.data) {
        double s2 = s * s;
        spread += s2 - std::log(s2) - 1.0;
    }
    return 0.5 * mu2 + 0.5 * spread;
}

double conditional_bpr(int target, const std::vector<int>& negatives,
                       const DualRepresentation& reps, const Tensor& item_emb, WhichRep which,
                       CombineRule rule, const Tensor* combine_w) {
    if (target <= 0) throw std::invalid_argument("conditional_bpr: padding/invalid target");
    if (negatives.empty()) throw std::invalid_argument("conditional_bpr: empty negative set");
    Tensor rep;
    switch (which) {
        case WhichRep::T: rep = reps.adjustment.t; break;
        case WhichRep::S: rep = reps.confounder; break;
        case WhichRep::TS: rep = combined_rep(reps, rule, combine_w); break;
    }
    int64_t d = rep.size();
    auto score = [&](int item) {
        Tensor row = Tensor::zeros({d});
        for (int64_t j = 0; j < d; ++j) row.data[j] = item_emb.at(item, j);
        return dot(rep, row);
    };
    double pos = score(target);
    double acc = 0.0;
    for (int neg : negatives) acc += bpr_loss(pos, score(neg));
    return acc / static_cast<double>(negatives.size());
}

LossBreakdown total_loss(double h_y_t, double h_y_s, double h_y_ts, double comp,
                         const LossWeights& w, const AblationMask& mask) {
    LossBreakdown out;
    out.term_a = mask.a ? (1.0 - w.gamma) * h_y_t : 0.0;
    out.term_b = mask.b ? (w.gamma - w.alpha) * h_y_s : 0.0;
    out.term_c = mask.c ? w.gamma * h_y_ts : 0.0;
    out.term_d = mask.d ? w.beta * comp : 0.0;
    out.total = ((out.term_a - out.term_b) + out.term_c) + out.term_d;
    return out;
}

Scores inference_scores(const Model& model, const SequenceExample& example) {
    return inference_scores_batch(model, std::span(&example, 1)).front();
}

std::vector<Scores> inference_scores_batch(const Model& model,
                                           std::span<const SequenceExample> examples) {
    Graph g;
    GraphBinding bp = bind(g, model);
    Batch batch = make_batch(examples, model.cfg);
    Graph::Var emb = embed_batch(g, bp, batch, model.cfg);
    Graph::Var h = encode_batch(g, bp, emb, batch, model.cfg, "adj.");
    Graph::Var sc = score_all(g, bp, h);
    const Tensor& vals = g.value(sc);
    std::vector<Scores> out(examples.size());
    int64_t cols = vals.cols();
    for (size_t i = 0; i < examples.size(); ++i) {
        out[i].values.assign(static_cast<size_t>(cols), 0.0);
        for (int64_t j = 0; j < cols; ++j) out[i].values[static_cast<size_t>(j)] =
            vals.at(static_cast<int64_t>(i), j);
        out[i].values[0] = -std::numeric_limits<double>::infinity();
    }
    return out;
}

StepLoss build_objective(Graph& g, const GraphBinding& bp, const Model& model, const Batch& batch,
                         const std::vector<int>& negatives, const ObjectiveConfig& ocfg,
                         RngStream& sample_rng) {
    const LossWeights& w = ocfg.weights;
    double ca = ocfg.mask.a ? 1.0 - w.gamma : 0.0;
    double cb = ocfg.mask.b ? w.gamma - w.alpha : 0.0;
    double cc = (ocfg.mask.c && !ocfg.detach_confounder) ? w.gamma : 0.0;
    double cd = ocfg.mask.d ? w.beta : 0.0;

    Graph::Var emb = embed_batch(g, bp, batch, model.cfg);
    Graph::Var mu = encode_batch(g, bp, emb, batch, model.cfg, "adj.");
    Graph::Var t = mu;
    Graph::Var sigma = -1;
    if (ocfg.stochastic) {
        if (!model.cfg.stochastic) throw ConfigError("stochastic objective needs a sigma head");
        sigma = g.softplus(g.add_bias(g.matmul(mu, bp.at("sigma.W")), bp.at("sigma.b")));
        Tensor eps = sample_rng.normal_tensor(g.value(sigma).shape);
        t = g.add(mu, g.mul_const(sigma, eps));
    }

    Graph::Var s = -1;
    if (!ocfg.detach_confounder) {
        if (!model.cfg.confounder) throw ConfigError("objective needs a confounder encoder");
        s = encode_batch(g, bp, emb, batch, model.cfg, "conf.");
    }

    StepLoss out;
    std::optional<Graph::Var> acc;
    auto accumulate = [&](Graph::Var term, double coeff, double sign, double* slot) {
        *slot = coeff * g.value(term).data[0];
        Graph::Var scaled = g.scale(term, sign * coeff);
        acc = acc ? g.add(*acc, scaled) : scaled;
    };

    if (ca != 0.0)
        accumulate(bpr_from_representation(g, bp, t, batch.targets, negatives), ca, 1.0,
                   &out.breakdown.term_a);
    if (cb != 0.0 && s >= 0) {
        Graph::Var s_b = ocfg.stop_b_grad_to_confounder ? g.detach(s) : s;
        accumulate(bpr_from_representation(g, bp, s_b, batch.targets, negatives), cb, -1.0,
                   &out.breakdown.term_b);
    }
    if (cc != 0.0 && s >= 0) {
        Graph::Var ts = model.cfg.combine == CombineRule::Sum
                            ? g.add(t, s)
                            : g.matmul(g.concat_cols(t, s), bp.at("combine.W"));
        accumulate(bpr_from_representation(g, bp, ts, batch.targets, negatives), cc, 1.0,
                   &out.breakdown.term_c);
    }
    if (cd != 0.0) {
        double inv = 0.5 / static_cast<double>(batch.size);
        Graph::Var comp = g.scale(g.sum(g.square(mu)), inv);
        if (ocfg.stochastic) {
            Graph::Var s2 = g.square(sigma);
            Graph::Var spread = g.scale(g.sum(g.affine(g.sub(s2, g.log_(s2)), 1.0, -1.0)), inv);
            comp = g.add(comp, spread);
        }
        accumulate(comp, cd, 1.0, &out.breakdown.term_d);
    }
    if (!acc) throw ConfigError("objective has no active terms (all masked or zero-weighted)");
    out.total = *acc;
    out.breakdown.total =
        ((out.breakdown.term_a - out.breakdown.term_b) + out.breakdown.term_c) +
        out.breakdown.term_d;
    return out;
}

}  // namespace seqrec

#pragma once

#include <span>
#include <vector>

#include "seqrec/model.hpp"

namespace seqrec {

// Weights of the four-term training objective. gamma > 1 would flip the sign
// of the accuracy term and is rejected; alpha > gamma only warns (the H(y|s)
// coefficient goes negative) because it is a legitimate, if odd, setting.
struct LossWeights {
    double alpha = 0.1;
    double beta = 0.01;
    double gamma = 0.5;

    // Throws ConfigError on invalid settings; returns a warning string
    // (empty if none) for alpha > gamma.
    std::string validate() const;
};

// Which of the four terms participate in the loss (ablation switch).
struct AblationMask {
    bool a = true;  // (1-gamma) H(y|t)
    bool b = true;  // (gamma-alpha) H(y|s), subtracted
    bool c = true;  // gamma H(y|t,s)
    bool d = true;  // beta ||mu||^2 (+ Gaussian KL spread terms when stochastic)
};

// Adjustment-path output: mean, per-dimension spread, and the sampled
// embedding. sigma all-zero means deterministic mode and t == mu.
struct StochasticEmbedding {
    Tensor mu;
    Tensor sigma;
    Tensor t;
};

struct DualRepresentation {
    StochasticEmbedding adjustment;
    Tensor confounder;  // s
};

// The four weighted scalars and their signed sum; the total is computed as
// ((a - b) + c) + d so the invariant holds bit-exactly.
struct LossBreakdown {
    double term_a = 0.0;
    double term_b = 0.0;
    double term_c = 0.0;
    double term_d = 0.0;
    double total = 0.0;
};

struct ObjectiveConfig {
    LossWeights weights;
    AblationMask mask;
    bool stochastic = false;            // sample t; otherwise t = mu
    bool detach_confounder = false;     // skip f_phi entirely (base-model reduction)
    bool stop_b_grad_to_confounder = false;
    CombineRule combine = CombineRule::Sum;
};

// ---- single-example forward paths (tests, inference) ----

StochasticEmbedding adjustment_forward(const Model& model, const SequenceExample& example,
                                       RngStream& rng, bool stochastic);
Tensor confounder_forward(const Model& model, const SequenceExample& example);

// KL(N(mu, diag sigma^2) || N(0, I)) in closed form. Deterministic embeddings
// (sigma all zero) reduce to the plain 1/2 ||mu||^2 penalty; a mixed sigma
// with exact zeros is rejected (log sigma^2 undefined) with guidance to use
// deterministic mode.
double compression_term(const StochasticEmbedding& emb);

enum class WhichRep { T, S, TS };

// Mean BPR loss of the target against each negative, scored from the chosen
// representation (t, s, or their combination).
double conditional_bpr(int target, const std::vector<int>& negatives,
                       const DualRepresentation& reps, const Tensor& item_emb, WhichRep which,
                       CombineRule rule = CombineRule::Sum, const Tensor* combine_w = nullptr);

LossBreakdown total_loss(double h_y_t, double h_y_s, double h_y_ts, double comp,
                         const LossWeights& w, const AblationMask& mask = {});

// Full-catalog scores with the padding column masked to -inf.
struct Scores {
    std::vector<double> values;  // length |I|+1
};

// Test-time scoring: adjustment path only, deterministic (t = mu), the
// confounder encoder is never evaluated.
Scores inference_scores(const Model& model, const SequenceExample& example);
std::vector<Scores> inference_scores_batch(const Model& model,
                                           std::span<const SequenceExample> examples);

// ---- batched training-step graph ----

struct StepLoss {
    Graph::Var total = -1;
    LossBreakdown breakdown;
};

// Builds the objective for one batch on the tape. Negatives hold one entry
// per example (shared across the t / s / ts terms, so term differences
// reflect representations rather than sampling noise). Terms whose
// coefficient is zero or that are masked out are left out of the graph, so
// the zero-weight setting reduces exactly to plain BPR on the t path.
StepLoss build_objective(Graph& g, const GraphBinding& bp, const Model& model, const Batch& batch,
                         const std::vector<int>& negatives, const ObjectiveConfig& ocfg,
                         RngStream& sample_rng);

}  // namespace seqrec

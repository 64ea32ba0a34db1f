#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "seqrec/metrics.hpp"
#include "seqrec/objective.hpp"

namespace seqrec {

enum class ObjectiveMode { Base, Framework };

struct TrainConfig {
    EncoderVariant variant = EncoderVariant::RecurrentGated;
    int dim = 64;
    int batch_size = 256;
    int n_max = 20;
    int layers = 2;
    int heads = 2;
    double lr = 1e-3;             // grid {1e-3, 5e-4, 1e-4}
    double weight_decay = 1e-6;   // grid {1e-4, 1e-6, 1e-8, 0}
    LossWeights weights;
    AblationMask mask;
    bool stochastic = false;
    CombineRule combine = CombineRule::Sum;
    ObjectiveMode mode = ObjectiveMode::Framework;
    bool detach_confounder = false;  // framework mode with f_phi switched off
    bool stop_b_grad_to_confounder = false;
    int max_epochs = 200;
    int patience = 10;  // early stop on validation NDCG@10
    int n_negatives = 1;
    uint64_t seed = 0;

    std::string to_json() const;
};

struct TrainResult {
    Model model;            // best-validation checkpoint
    double best_val_ndcg10 = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
    int64_t steps_run = 0;
};

// Seeded mini-batch training of the four-term objective (or plain BPR in
// base mode) with per-epoch validation and early stopping. Per-step loss
// breakdowns go to `loss_log` as json-lines when provided. Throws
// DivergenceError on a non-finite loss, naming the offending step.
TrainResult train(const DatasetSplits& splits, const TrainConfig& config,
                  std::ostream* loss_log = nullptr, std::ostream* progress = nullptr);

struct AblationRow {
    std::string name;  // raw, w/o (1), w/o (2), w/o (3)
    EvalReport report;
};

// Trains the full objective and the three single-term-dropped variants under
// the same seed and reports test HR@20 / NDCG@20 per row.
std::vector<AblationRow> ablate(const DatasetSplits& splits, const TrainConfig& base_config,
                                std::ostream* progress = nullptr);

std::string ablation_table_text(const std::vector<AblationRow>& rows);
std::string ablation_table_json(const std::vector<AblationRow>& rows);

// Base-vs-framework rows with relative improvement, HR/NDCG at k in {5,10,20}.
std::string comparison_table_text(const EvalReport& base, const EvalReport& framework);

}  // namespace seqrec

#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqrec/adam.hpp"
#include "seqrec/data.hpp"
#include "seqrec/graph.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

enum class EncoderVariant { RecurrentGated, SelfAttentionCausal, SelfAttentionBidirectional };
enum class CombineRule { Sum, ConcatProject };

std::string to_string(EncoderVariant v);
EncoderVariant variant_from_name(const std::string& name);

struct ModelConfig {
    EncoderVariant variant = EncoderVariant::RecurrentGated;
    int dim = 64;
    int n_max = 20;
    int layers = 2;  // attention variants; the recurrent encoder uses one layer
    int heads = 2;
    int num_items = 0;  // |I|, excluding padding id 0
    bool stochastic = false;        // sigma head for the adjustment embedding
    bool confounder = false;        // allocate the separately parameterized f_phi
    CombineRule combine = CombineRule::Sum;
};

// All trainable state. Row 0 of the item table is the padding embedding,
// identically zero and excluded from updates. Position embeddings are indexed
// by recency (0 = most recent item), which makes the final state invariant to
// the amount of left padding.
struct Model {
    ModelConfig cfg;
    ParameterStore params;

    static Model init(const ModelConfig& cfg, const RngStream& seed_stream);

    void zero_padding_row();
};

// Parameters bound into a graph as leaves, by name.
struct GraphBinding {
    std::unordered_map<std::string, Graph::Var> vars;
    Graph::Var at(const std::string& name) const;
};

GraphBinding bind(Graph& g, const Model& model);

// A batch of examples flattened for the tape: item/position indices are
// (B * n_max) with padding id 0, row_mask zeroes padding rows.
struct Batch {
    int size = 0;
    int n = 0;
    std::vector<int64_t> item_idx;
    std::vector<int64_t> pos_idx;
    std::vector<int64_t> last_idx;  // index of each example's final row
    std::vector<int> targets;
    std::vector<int> true_len;
    Tensor row_mask;  // (B*n, dim)
};

Batch make_batch(std::span<const SequenceExample> examples, const ModelConfig& cfg);

// e^u rows: item embedding + recency position embedding, padding rows zeroed.
Graph::Var embed_batch(Graph& g, const GraphBinding& bp, const Batch& batch,
                       const ModelConfig& cfg);

// Final hidden state h_n per example, shape (B, dim). `prefix` selects the
// encoder parameter set ("adj." or "conf."). Padding positions are masked:
// the recurrent variant skips them, the attention variants never attend to
// them, so h_n depends only on real items.
Graph::Var encode_batch(Graph& g, const GraphBinding& bp, Graph::Var emb, const Batch& batch,
                        const ModelConfig& cfg, const std::string& prefix);

// Full-catalog scores h M^T, shape (B, |I|+1); column 0 is the padding item
// and is masked to -inf by callers that rank.
Graph::Var score_all(Graph& g, const GraphBinding& bp, Graph::Var h);

// Pairwise BPR: mean over all (positive, negative) pairs of
// -ln sigma(score_pos - score_neg), in softplus form. `negatives` holds
// n_neg entries per example.
Graph::Var bpr_from_representation(Graph& g, const GraphBinding& bp, Graph::Var h,
                                   const std::vector<int>& positives,
                                   const std::vector<int>& negatives);

// Scalar BPR loss -ln sigma(pos - neg) via softplus; always >= 0.
double bpr_loss(double score_pos, double score_neg);

// Checkpoints round-trip bit-exactly (shortest round-trip double printing).
void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& config_echo = {});
Model load_checkpoint(const std::string& path, std::string* config_echo = nullptr);

}  // namespace seqrec

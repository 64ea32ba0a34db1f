#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

// Interaction generator with a planted spurious correlation: during training,
// the next item is drawn from true preference with weight 1-rho and from a
// shared-tag match with the history with weight rho. With flip_at_test the
// held-out (validation and test) targets come from true preference only, so
// tag-following stops paying off exactly at evaluation time.
struct SynthConfig {
    int n_users = 2000;
    int n_items = 500;
    int d_true = 8;    // latent preference dimension
    int n_archetypes = 8;     // users cluster around shared preference vectors
    double pref_noise = 0.3;  // per-user deviation from the archetype
    int n_tags = 16;   // confounder tag alphabet
    int history_length = 10;  // total interactions per user
    double spurious_strength = 0.8;  // rho in [0,1]
    bool flip_at_test = true;
    uint64_t seed = 0;
    int n_max = 10;  // padding length of emitted examples

    void validate() const;
};

struct SynthGroundTruth {
    std::vector<std::vector<double>> user_pref;  // n_users x d_true
    std::vector<std::vector<double>> item_attr;  // n_items x d_true
    std::vector<int> item_tag;                   // n_items, in [0, n_tags)

    // item ids here are catalog ids minus 1.
    int tag_of(int item_id) const { return item_tag[static_cast<size_t>(item_id - 1)]; }
};

std::pair<DatasetSplits, SynthGroundTruth> generate(const SynthConfig& config);

void save_ground_truth(const SynthGroundTruth& gt, const SynthConfig& config,
                       const std::string& path);

// Reference predictor that scores items purely by how often their tag occurs
// in the history, random tie order. Used to verify the planted correlation.
double tag_oracle_hr_at_k(const std::vector<SequenceExample>& split, const SynthGroundTruth& gt,
                          int k, RngStream& rng);

}  // namespace seqrec

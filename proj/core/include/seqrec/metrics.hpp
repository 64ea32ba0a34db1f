#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seqrec/objective.hpp"

namespace seqrec {

// Full-catalog rank of the target: 1 + number of items scored strictly above
// it. Ties count against the target (pessimistic), so a constant-score model
// cannot beat chance. History items stay in the ranking unless `mask_history`
// is set.
int rank_of_target(const Scores& scores, int target, const std::vector<int>& history,
                   bool mask_history = false);

int hr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);

struct EvalReport {
    std::map<int, double> hr;    // k -> mean HR@k
    std::map<int, double> ndcg;  // k -> mean NDCG@k
    int64_t n_users = 0;
    uint64_t seed = 0;
    std::string config_echo;

    std::string to_json() const;
    std::string to_text() const;  // aligned columns, one row
};

inline const std::vector<int> kEvalCutoffs = {5, 10, 20};

// Leave-one-out evaluation over every example of a split: inference scores
// from the adjustment path, rank, metric means.
EvalReport evaluate(const Model& model, const std::vector<SequenceExample>& split,
                    bool mask_history = false, int batch_size = 256);

}  // namespace seqrec

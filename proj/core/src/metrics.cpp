#include "seqrec/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "seqrec/errors.hpp"

namespace seqrec {

int rank_of_target(const Scores& scores, int target, const std::vector<int>& history,
                   bool mask_history) {
    if (target <= 0 || static_cast<size_t>(target) >= scores.values.size())
        throw std::invalid_argument("rank_of_target: invalid target id");
    std::vector<char> skip(scores.values.size(), 0);
    skip[0] = 1;  // padding
    if (mask_history)
        for (int h : history)
            if (h > 0 && h != target) skip[static_cast<size_t>(h)] = 1;
    double ts = scores.values[static_cast<size_t>(target)];
    int above = 0;
    int ties = 0;
    for (size_t i = 1; i < scores.values.size(); ++i) {
        if (skip[i] || static_cast<int>(i) == target) continue;
        if (scores.values[i] > ts)
            ++above;
        else if (scores.values[i] == ts)
            ++ties;
    }
    return 1 + above + ties;  // pessimistic ties
}

int hr_at_k(int rank, int k) {
    if (rank < 1 || k < 1) throw std::invalid_argument("hr_at_k: rank and k must be >= 1");
    return rank <= k ? 1 : 0;
}

double ndcg_at_k(int rank, int k) {
    if (rank < 1 || k < 1) throw std::invalid_argument("ndcg_at_k: rank and k must be >= 1");
    if (rank > k) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    for (const auto& [k, v] : hr) j["hr"][std::to_string(k)] = v;
    for (const auto& [k, v] : ndcg) j["ndcg"][std::to_string(k)] = v;
    j["n_users"] = n_users;
    j["seed"] = seed;
    if (!config_echo.empty()) j["config_echo"] = config_echo;
    return j.dump(2);
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    for (const auto& [k, v] : hr) os << "HR@" << k << "=" << v << "  ";
    for (const auto& [k, v] : ndcg) os << "NDCG@" << k << "=" << v << "  ";
    os << "users=" << n_users;
    return os.str();
}

EvalReport evaluate(const Model& model, const std::vector<SequenceExample>& split,
                    bool mask_history, int batch_size) {
    if (split.empty()) throw DataError("evaluate: empty split");
    EvalReport rep;
    for (int k : kEvalCutoffs) {
        rep.hr[k] = 0.0;
        rep.ndcg[k] = 0.0;
    }
    for (size_t start = 0; start < split.size(); start += static_cast<size_t>(batch_size)) {
        size_t count = std::min(static_cast<size_t>(batch_size), split.size() - start);
        auto scores = inference_scores_batch(model, std::span(split.data() + start, count));
        for (size_t i = 0; i < count; ++i) {
            const SequenceExample& ex = split[start + i];
            int rank = rank_of_target(scores[i], ex.target, ex.items, mask_history);
            for (int k : kEvalCutoffs) {
                rep.hr[k] += hr_at_k(rank, k);
                rep.ndcg[k] += ndcg_at_k(rank, k);
            }
        }
    }
    rep.n_users = static_cast<int64_t>(split.size());
    for (int k : kEvalCutoffs) {
        rep.hr[k] /= static_cast<double>(rep.n_users);
        rep.ndcg[k] /= static_cast<double>(rep.n_users);
    }
    return rep;
}

}  // namespace seqrec

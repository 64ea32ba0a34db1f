#include "seqrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

std::string item_name(int idx) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "i%06d", idx);
    return buf;
}

std::string user_name(int idx) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "u%06d", idx);
    return buf;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_users < 1 || n_items < 1 || d_true < 1 || n_tags < 1 || n_max < 1)
        throw ConfigError("synthetic config: all counts must be >= 1");
    if (spurious_strength < 0.0 || spurious_strength > 1.0)
        throw ConfigError("synthetic config: spurious_strength must be in [0,1]");
    if (n_archetypes < 1 || pref_noise < 0.0)
        throw ConfigError("synthetic config: need n_archetypes >= 1 and pref_noise >= 0");
    if (history_length < 3)
        throw ConfigError("synthetic config: history_length < 3 gives fewer than 3 "
                          "interactions per user");
}

std::pair<DatasetSplits, SynthGroundTruth> generate(const SynthConfig& config) {
    config.validate();
    RngStream root(config.seed);

    // Item attributes and tags.
    std::vector<std::vector<double>> item_attr(static_cast<size_t>(config.n_items));
    std::vector<int> item_tag(static_cast<size_t>(config.n_items));
    std::vector<std::vector<int>> by_tag(static_cast<size_t>(config.n_tags));
    {
        RngStream rng = root.derive("items");
        for (int j = 0; j < config.n_items; ++j) {
            auto& a = item_attr[static_cast<size_t>(j)];
            a.resize(static_cast<size_t>(config.d_true));
            for (double& v : a) v = rng.normal();
            int tag = static_cast<int>(rng.uniform_int(0, config.n_tags - 1));
            item_tag[static_cast<size_t>(j)] = tag;
            by_tag[static_cast<size_t>(tag)].push_back(j);
        }
    }

    // Shared preference archetypes: users are noisy copies of one of a few
    // latent profiles, which gives the cross-user co-occurrence structure a
    // sequence model needs to learn preference at all.
    std::vector<std::vector<double>> archetype(static_cast<size_t>(config.n_archetypes));
    {
        RngStream rng = root.derive("archetypes");
        for (auto& a : archetype) {
            a.resize(static_cast<size_t>(config.d_true));
            for (double& v : a) v = rng.normal();
        }
    }

    std::vector<Interaction> interactions;
    interactions.reserve(static_cast<size_t>(config.n_users) * config.history_length);
    std::vector<std::vector<double>> user_pref(static_cast<size_t>(config.n_users));

    for (int u = 0; u < config.n_users; ++u) {
        RngStream rng = root.derive("user" + std::to_string(u));
        auto& pref = user_pref[static_cast<size_t>(u)];
        pref.resize(static_cast<size_t>(config.d_true));
        const auto& base = archetype[static_cast<size_t>(
            rng.uniform_int(0, config.n_archetypes - 1))];
        for (size_t c = 0; c < pref.size(); ++c)
            pref[c] = base[c] + config.pref_noise * rng.normal();

        // Preference distribution: softmax of the latent affinity.
        // Scale affinities so logit spread is O(1) regardless of d_true;
        // otherwise the softmax collapses onto a handful of items and their
        // tags leak preference even at spurious_strength 0.
        const double inv_temp = 1.0 / std::sqrt(static_cast<double>(config.d_true));
        std::vector<double> cdf(static_cast<size_t>(config.n_items));
        double mx = -1e300;
        for (int j = 0; j < config.n_items; ++j) {
            double s = 0.0;
            for (int c = 0; c < config.d_true; ++c)
                s += pref[static_cast<size_t>(c)] * item_attr[static_cast<size_t>(j)][static_cast<size_t>(c)];
            cdf[static_cast<size_t>(j)] = s * inv_temp;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (double& v : cdf) {
            v = std::exp(v - mx);
            z += v;
            v = z;
        }
        auto sample_pref = [&] {
            double x = rng.uniform() * z;
            auto it = std::lower_bound(cdf.begin(), cdf.end(), x);
            return static_cast<int>(std::min<size_t>(
                static_cast<size_t>(it - cdf.begin()), cdf.size() - 1));
        };

        std::vector<int> history;
        for (int k = 0; k < config.history_length; ++k) {
            bool heldout = config.flip_at_test && k >= config.history_length - 2;
            int item;
            if (!history.empty() && !heldout && rng.uniform() < config.spurious_strength) {
                int anchor = history[static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(history.size()) - 1))];
                const auto& pool = by_tag[static_cast<size_t>(item_tag[static_cast<size_t>(anchor)])];
                item = pool[static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
            } else {
                item = sample_pref();
            }
            history.push_back(item);
            interactions.push_back({user_name(u), item_name(item), k});
        }
    }

    DatasetSplits splits = build_splits(interactions, config.n_max);

    // Reindex the ground truth into catalog order (catalog id - 1).
    SynthGroundTruth gt;
    gt.item_attr.resize(splits.catalog.item_names.size());
    gt.item_tag.resize(splits.catalog.item_names.size());
    for (size_t i = 0; i < splits.catalog.item_names.size(); ++i) {
        int orig = std::stoi(splits.catalog.item_names[i].substr(1));
        gt.item_attr[i] = item_attr[static_cast<size_t>(orig)];
        gt.item_tag[i] = item_tag[static_cast<size_t>(orig)];
    }
    gt.user_pref.resize(splits.catalog.user_names.size());
    for (size_t i = 0; i < splits.catalog.user_names.size(); ++i) {
        int orig = std::stoi(splits.catalog.user_names[i].substr(1));
        gt.user_pref[i] = user_pref[static_cast<size_t>(orig)];
    }
    return {std::move(splits), std::move(gt)};
}

void save_ground_truth(const SynthGroundTruth& gt, const SynthConfig& config,
                       const std::string& path) {
    nlohmann::json j;
    j["config"] = {{"n_users", config.n_users},
                   {"n_items", config.n_items},
                   {"d_true", config.d_true},
                   {"n_archetypes", config.n_archetypes},
                   {"pref_noise", config.pref_noise},
                   {"n_tags", config.n_tags},
                   {"history_length", config.history_length},
                   {"spurious_strength", config.spurious_strength},
                   {"flip_at_test", config.flip_at_test},
                   {"seed", config.seed},
                   {"n_max", config.n_max}};
    j["user_pref"] = gt.user_pref;
    j["item_attr"] = gt.item_attr;
    j["item_tag"] = gt.item_tag;
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path);
    os << j.dump() << '\n';
}

double tag_oracle_hr_at_k(const std::vector<SequenceExample>& split, const SynthGroundTruth& gt,
                          int k, RngStream& rng) {
    if (split.empty()) throw DataError("tag_oracle_hr_at_k: empty split");
    int n_items = static_cast<int>(gt.item_tag.size());
    int hits = 0;
    std::vector<int> tag_count(static_cast<size_t>(*std::max_element(gt.item_tag.begin(),
                                                                     gt.item_tag.end())) + 1);
    for (const auto& ex : split) {
        std::fill(tag_count.begin(), tag_count.end(), 0);
        for (int item : ex.items)
            if (item > 0) ++tag_count[static_cast<size_t>(gt.tag_of(item))];
        double t_score = tag_count[static_cast<size_t>(gt.tag_of(ex.target))];
        double t_jitter = rng.uniform();
        int above = 0;
        for (int j = 1; j <= n_items; ++j) {
            if (j == ex.target) continue;
            double s = tag_count[static_cast<size_t>(gt.tag_of(j))];
            if (s > t_score || (s == t_score && rng.uniform() > t_jitter)) ++above;
        }
        if (above < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(split.size());
}

}  // namespace seqrec

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "seqrec/metrics.hpp"
#include "seqrec/synthetic.hpp"

using namespace seqrec;

namespace {

// Independent oracle: sort catalog ids by score descending, breaking ties so
// the target lands after every equal-scored item, then report its position.
int rank_oracle(const Scores& scores, int target) {
    std::vector<int> ids;
    for (int j = 1; j < static_cast<int>(scores.values.size()); ++j) ids.push_back(j);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        double sa = scores.values[static_cast<size_t>(a)];
        double sb = scores.values[static_cast<size_t>(b)];
        if (sa != sb) return sa > sb;
        return (a == target) < (b == target);  // target last among ties
    });
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == target) return static_cast<int>(i) + 1;
    return -1;
}

}  // namespace

TEST_CASE("rank matches a brute-force sort on 1000 random score vectors") {
    RngStream rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 5 + static_cast<int>(rng.uniform_int(0, 45));
        Scores s;
        s.values.resize(static_cast<size_t>(n) + 1);
        s.values[0] = -std::numeric_limits<double>::infinity();
        for (int j = 1; j <= n; ++j) {
            // quantized scores so ties occur often
            s.values[static_cast<size_t>(j)] = std::floor(rng.uniform() * 8.0);
        }
        int target = 1 + static_cast<int>(rng.uniform_int(0, n - 1));
        CHECK(rank_of_target(s, target, {}) == rank_oracle(s, target));
    }
}

TEST_CASE("constant scores rank the target last") {
    Scores s;
    s.values = {-std::numeric_limits<double>::infinity(), 1.0, 1.0, 1.0, 1.0};
    for (int target = 1; target <= 4; ++target) CHECK(rank_of_target(s, target, {}) == 4);
}

TEST_CASE("history masking removes history items from the ranking") {
    Scores s;
    s.values = {-std::numeric_limits<double>::infinity(), 9.0, 8.0, 7.0, 6.0};
    CHECK(rank_of_target(s, 3, {1, 2}) == 3);
    CHECK(rank_of_target(s, 3, {1, 2}, true) == 1);
    CHECK(rank_of_target(s, 3, {0, 1}, true) == 2);  // padding entries ignored
}

TEST_CASE("hit rate and discounted gain at fixed ranks") {
    CHECK(hr_at_k(3, 5) == 1);
    CHECK(hr_at_k(6, 5) == 0);
    CHECK(hr_at_k(5, 5) == 1);
    CHECK(ndcg_at_k(1, 5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ndcg_at_k(3, 5) == doctest::Approx(0.5).epsilon(1e-15));  // 1/log2(4)
    CHECK(ndcg_at_k(6, 5) == 0.0);
    CHECK(ndcg_at_k(10, 20) == doctest::Approx(1.0 / std::log2(11.0)).epsilon(1e-12));
}

TEST_CASE("five-user fixture: report equals hand-computed means") {
    // ranks chosen by hand: 1, 3, 6, 12, 25
    std::vector<int> ranks = {1, 3, 6, 12, 25};
    double hr5 = 2.0 / 5.0, hr10 = 3.0 / 5.0, hr20 = 4.0 / 5.0;
    double nd5 = (1.0 + 0.5) / 5.0;
    double nd10 = (1.0 + 0.5 + 1.0 / std::log2(7.0)) / 5.0;
    double nd20 = (1.0 + 0.5 + 1.0 / std::log2(7.0) + 1.0 / std::log2(13.0)) / 5.0;
    double shr5 = 0, shr10 = 0, shr20 = 0, snd5 = 0, snd10 = 0, snd20 = 0;
    for (int r : ranks) {
        shr5 += hr_at_k(r, 5);
        shr10 += hr_at_k(r, 10);
        shr20 += hr_at_k(r, 20);
        snd5 += ndcg_at_k(r, 5);
        snd10 += ndcg_at_k(r, 10);
        snd20 += ndcg_at_k(r, 20);
    }
    CHECK(shr5 / 5 == doctest::Approx(hr5).epsilon(1e-15));
    CHECK(shr10 / 5 == doctest::Approx(hr10).epsilon(1e-15));
    CHECK(shr20 / 5 == doctest::Approx(hr20).epsilon(1e-15));
    CHECK(snd5 / 5 == doctest::Approx(nd5).epsilon(1e-12));
    CHECK(snd10 / 5 == doctest::Approx(nd10).epsilon(1e-12));
    CHECK(snd20 / 5 == doctest::Approx(nd20).epsilon(1e-12));
}

TEST_CASE("split evaluation agrees with per-example scoring and is monotone in k") {
    SynthConfig cfg;
    cfg.n_users = 60;
    cfg.n_items = 80;
    cfg.history_length = 6;
    cfg.n_max = 6;
    cfg.seed = 5;
    auto [splits, gt] = generate(cfg);

    ModelConfig mc;
    mc.variant = EncoderVariant::RecurrentGated;
    mc.dim = 8;
    mc.n_max = 6;
    mc.num_items = splits.catalog.num_items();
    Model model = Model::init(mc, RngStream(33));

    EvalReport rep = evaluate(model, splits.test);
    CHECK(rep.n_users == 60);
    CHECK(rep.hr.at(5) <= rep.hr.at(10));
    CHECK(rep.hr.at(10) <= rep.hr.at(20));
    CHECK(rep.ndcg.at(5) <= rep.ndcg.at(10));
    CHECK(rep.ndcg.at(10) <= rep.ndcg.at(20));

    // hand loop over the same split
    double hr10 = 0.0, nd20 = 0.0;
    for (const auto& ex : splits.test) {
        int rank = rank_of_target(inference_scores(model, ex), ex.target, ex.items);
        hr10 += hr_at_k(rank, 10);
        nd20 += ndcg_at_k(rank, 20);
    }
    CHECK(rep.hr.at(10) == doctest::Approx(hr10 / 60.0).epsilon(1e-12));
    CHECK(rep.ndcg.at(20) == doctest::Approx(nd20 / 60.0).epsilon(1e-12));

    // odd batch sizes change nothing
    EvalReport rep7 = evaluate(model, splits.test, false, 7);
    CHECK(rep7.hr.at(10) == doctest::Approx(rep.hr.at(10)).epsilon(1e-12));
}

TEST_CASE("an untrained model scores HR@10 near 10 / catalog") {
    SynthConfig cfg;
    cfg.n_users = 800;
    cfg.n_items = 500;
    cfg.history_length = 5;
    cfg.n_max = 5;
    cfg.seed = 9;
    auto [splits, gt] = generate(cfg);

    ModelConfig mc;
    mc.variant = EncoderVariant::RecurrentGated;
    mc.dim = 16;
    mc.n_max = 5;
    mc.num_items = splits.catalog.num_items();
    Model model = Model::init(mc, RngStream(77));

    double chance = 10.0 / splits.catalog.num_items();
    double sd = std::sqrt(chance * (1.0 - chance) / 800.0);
    EvalReport rep = evaluate(model, splits.test);
    CHECK(std::abs(rep.hr.at(10) - chance) < 4.0 * sd + 0.01);
}

TEST_CASE("report serialization carries the numbers") {
    EvalReport rep;
    rep.hr = {{5, 0.1}, {10, 0.2}, {20, 0.4}};
    rep.ndcg = {{5, 0.05}, {10, 0.08}, {20, 0.12}};
    rep.n_users = 42;
    rep.seed = 7;
    rep.config_echo = "{\"note\":1}";
    std::string j = rep.to_json();
    CHECK(j.find("0.2") != std::string::npos);
    CHECK(j.find("42") != std::string::npos);
    std::string t = rep.to_text();
    CHECK(t.find("HR@10") != std::string::npos);
}

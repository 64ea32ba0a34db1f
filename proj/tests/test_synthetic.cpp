#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "seqrec/errors.hpp"
#include "seqrec/synthetic.hpp"

using namespace seqrec;

namespace {

SynthConfig small_config(double rho, uint64_t seed) {
    SynthConfig cfg;
    cfg.n_users = 400;
    cfg.n_items = 100;
    cfg.history_length = 8;
    cfg.n_max = 8;
    cfg.spurious_strength = rho;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    SynthConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    SynthConfig bad = cfg;
    bad.spurious_strength = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.history_length = 2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.n_items = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generator shape invariants") {
    auto [splits, gt] = generate(small_config(0.5, 3));
    CHECK(splits.test.size() == 400);
    CHECK(splits.validation.size() == 400);
    // history_length=8 -> targets at t=1..5 train, 6 valid, 7 test
    CHECK(splits.train.size() == 400 * 5);
    CHECK(gt.user_pref.size() == 400);
    CHECK(gt.item_attr.size() == 100);
    CHECK(gt.item_tag.size() == 100);
    for (int t : gt.item_tag) {
        CHECK(t >= 0);
        CHECK(t < 16);
    }
    // ground truth is aligned with catalog ids
    CHECK(splits.catalog.num_items() <= 100);
    for (const auto& ex : splits.test) {
        CHECK(ex.target >= 1);
        CHECK(ex.target <= splits.catalog.num_items());
    }
}

TEST_CASE("same seed gives byte-identical output, different seed differs") {
    auto cfg = small_config(0.7, 11);
    auto [s1, g1] = generate(cfg);
    auto [s2, g2] = generate(cfg);
    CHECK(s1.train == s2.train);
    CHECK(s1.test == s2.test);
    CHECK(g1.user_pref == g2.user_pref);
    CHECK(g1.item_tag == g2.item_tag);
    cfg.seed = 12;
    auto [s3, g3] = generate(cfg);
    CHECK(s1.train != s3.train);
}

TEST_CASE("rho=0: tag oracle is at chance on every split") {
    // With no spurious draws, tag frequency carries only the weak signal
    // that preferences induce on tags; on a fresh catalog the oracle should
    // sit near chance = k / n_items.
    auto cfg = small_config(0.0, 21);
    auto [splits, gt] = generate(cfg);
    RngStream rng(77);
    const int k = 10;
    double chance = static_cast<double>(k) / splits.catalog.num_items();
    // Binomial SD over n users.
    double sd = std::sqrt(chance * (1.0 - chance) / static_cast<double>(splits.test.size()));
    double hr_test = tag_oracle_hr_at_k(splits.test, gt, k, rng);
    // Loose band: tags are not independent of preference, so allow drift but
    // nothing like the rho>0 regime.
    CHECK(hr_test < chance + 8.0 * sd + 0.05);
}

TEST_CASE("rho=1 with flip: tag oracle beats chance on train, falls to chance on test") {
    auto cfg = small_config(1.0, 31);
    cfg.flip_at_test = true;
    auto [splits, gt] = generate(cfg);
    RngStream rng(78);
    const int k = 10;
    double chance = static_cast<double>(k) / splits.catalog.num_items();
    double hr_train = tag_oracle_hr_at_k(splits.train, gt, k, rng);
    double hr_test = tag_oracle_hr_at_k(splits.test, gt, k, rng);
    CHECK(hr_train > 3.0 * chance);       // strong planted signal
    CHECK(hr_test < chance + 0.08);       // signal removed at evaluation
}

TEST_CASE("rho=1 without flip: tag oracle stays strong at test time") {
    auto cfg = small_config(1.0, 41);
    cfg.flip_at_test = false;
    auto [splits, gt] = generate(cfg);
    RngStream rng(79);
    const int k = 10;
    double chance = static_cast<double>(k) / splits.catalog.num_items();
    CHECK(tag_oracle_hr_at_k(splits.test, gt, k, rng) > 3.0 * chance);
}

TEST_CASE("train-split tag-oracle accuracy is monotone in rho") {
    const int k = 10;
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        std::vector<double> hr;
        for (double rho : {0.0, 0.5, 1.0}) {
            auto [splits, gt] = generate(small_config(rho, seed));
            RngStream rng(100 + seed);
            hr.push_back(tag_oracle_hr_at_k(splits.train, gt, k, rng));
        }
        CHECK(hr[0] < hr[1]);
        CHECK(hr[1] < hr[2]);
    }
}

TEST_CASE("ground truth serialization") {
    auto cfg = small_config(0.6, 51);
    auto [splits, gt] = generate(cfg);
    auto path = (std::filesystem::temp_directory_path() / "seqrec_gt.json").string();
    save_ground_truth(gt, cfg, path);
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    auto text = ss.str();
    CHECK(text.find("\"spurious_strength\"") != std::string::npos);
    CHECK(text.find("\"item_tag\"") != std::string::npos);
    CHECK(text.find("\"user_pref\"") != std::string::npos);
}

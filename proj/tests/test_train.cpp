#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "seqrec/errors.hpp"
#include "seqrec/synthetic.hpp"
#include "seqrec/train.hpp"

using namespace seqrec;

namespace {

DatasetSplits small_data(uint64_t seed) {
    SynthConfig cfg;
    cfg.n_users = 80;
    cfg.n_items = 50;
    cfg.history_length = 5;
    cfg.n_max = 5;
    cfg.spurious_strength = 0.5;
    cfg.seed = seed;
    return generate(cfg).first;
}

TrainConfig small_train(uint64_t seed) {
    TrainConfig cfg;
    cfg.dim = 8;
    cfg.batch_size = 32;
    cfg.n_max = 5;
    cfg.max_epochs = 3;
    cfg.patience = 100;
    cfg.seed = seed;
    return cfg;
}

bool params_equal(const Model& a, const Model& b) {
    for (const auto& e : a.params.entries()) {
        if (!b.params.contains(e.name)) return false;
        if (b.params.at(e.name).value.data != e.value.data) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("zero-weight framework training is bit-identical to the base objective") {
    DatasetSplits data = small_data(1);

    TrainConfig base = small_train(42);
    base.mode = ObjectiveMode::Base;
    TrainResult rb = train(data, base);

    TrainConfig reduced = small_train(42);
    reduced.mode = ObjectiveMode::Framework;
    reduced.weights.alpha = reduced.weights.beta = reduced.weights.gamma = 0.0;
    reduced.stochastic = false;
    reduced.detach_confounder = true;
    TrainResult rf = train(data, reduced);

    CHECK(rb.steps_run == rf.steps_run);
    CHECK(rb.epochs_run == rf.epochs_run);
    // every parameter the base model owns matches bit for bit
    CHECK(params_equal(rb.model, rf.model));
    CHECK(rb.best_val_ndcg10 == rf.best_val_ndcg10);
}

TEST_CASE("training is deterministic under a fixed seed") {
    DatasetSplits data = small_data(2);
    TrainConfig cfg = small_train(7);
    cfg.weights.alpha = 0.05;
    cfg.weights.gamma = 0.3;
    cfg.weights.beta = 0.01;
    cfg.stochastic = true;
    TrainResult a = train(data, cfg);
    TrainResult b = train(data, cfg);
    CHECK(params_equal(a.model, b.model));
    CHECK(a.best_val_ndcg10 == b.best_val_ndcg10);
    CHECK(a.best_epoch == b.best_epoch);

    cfg.seed = 8;
    TrainResult c = train(data, cfg);
    CHECK_FALSE(params_equal(a.model, c.model));
}

TEST_CASE("a masked term with zero coefficient changes nothing") {
    // gamma == alpha zeroes the H(y|s) coefficient, so dropping the term
    // entirely must give the same training trajectory.
    DatasetSplits data = small_data(3);
    TrainConfig cfg = small_train(11);
    cfg.weights.alpha = 0.3;
    cfg.weights.gamma = 0.3;
    cfg.weights.beta = 0.01;
    TrainResult with_term = train(data, cfg);
    cfg.mask.b = false;
    TrainResult without_term = train(data, cfg);
    CHECK(params_equal(with_term.model, without_term.model));
}

TEST_CASE("early stopping respects patience") {
    DatasetSplits data = small_data(4);
    TrainConfig cfg = small_train(13);
    cfg.max_epochs = 30;
    cfg.patience = 0;  // stop at the first epoch with no improvement
    TrainResult r = train(data, cfg);
    CHECK(r.epochs_run <= 30);
    CHECK(r.epochs_run == r.best_epoch + 1 + 1);  // one non-improving epoch allowed
    CHECK(r.best_epoch >= 0);
}

TEST_CASE("per-step loss log carries the four terms") {
    DatasetSplits data = small_data(5);
    TrainConfig cfg = small_train(17);
    cfg.max_epochs = 1;
    cfg.stochastic = true;
    std::ostringstream log;
    TrainResult r = train(data, cfg, &log);
    CHECK(r.steps_run > 0);
    std::string text = log.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == r.steps_run);
    CHECK(text.find("\"term_a\"") != std::string::npos);
    CHECK(text.find("\"term_d\"") != std::string::npos);
    CHECK(text.find("\"total\"") != std::string::npos);

    CHECK(cfg.to_json().find("\"lr\"") != std::string::npos);
}

TEST_CASE("an exploding run raises a divergence error") {
    DatasetSplits data = small_data(6);
    TrainConfig cfg = small_train(19);
    cfg.mode = ObjectiveMode::Framework;
    cfg.stochastic = true;
    cfg.weights.beta = 1.0;
    cfg.lr = 1e200;  // drives mu and sigma to overflow within a step or two
    cfg.max_epochs = 5;
    CHECK_THROWS_AS(train(data, cfg), DivergenceError);
}

TEST_CASE("ablation grid has the four expected rows") {
    DatasetSplits data = small_data(7);
    TrainConfig cfg = small_train(23);
    cfg.max_epochs = 1;
    auto rows = ablate(data, cfg);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].name == "raw");
    CHECK(rows[1].name == "w/o (1)");
    CHECK(rows[2].name == "w/o (2)");
    CHECK(rows[3].name == "w/o (3)");
    for (const auto& r : rows) {
        CHECK(r.report.hr.count(20) == 1);
        CHECK(r.report.ndcg.count(20) == 1);
    }
    std::string text = ablation_table_text(rows);
    CHECK(text.find("w/o (2)") != std::string::npos);
    CHECK(text.find("HR@20") != std::string::npos);
    std::string j = ablation_table_json(rows);
    CHECK(j.find("\"raw\"") != std::string::npos);
}

TEST_CASE("comparison table shows relative improvement") {
    EvalReport base, framework;
    for (int k : kEvalCutoffs) {
        base.hr[k] = 0.2;
        base.ndcg[k] = 0.1;
        framework.hr[k] = 0.25;
        framework.ndcg[k] = 0.12;
    }
    std::string t = comparison_table_text(base, framework);
    CHECK(t.find("25.0") != std::string::npos);  // 0.25 vs 0.2 -> +25%
    CHECK(t.find("HR@10") != std::string::npos);
}

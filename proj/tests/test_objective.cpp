#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "seqrec/errors.hpp"
#include "seqrec/infotheory.hpp"
#include "seqrec/objective.hpp"
#include "seqrec/ops.hpp"

using namespace seqrec;

namespace {

ModelConfig dual_config(int dim, int n_max, int items, bool stochastic) {
    ModelConfig cfg;
    cfg.variant = EncoderVariant::RecurrentGated;
    cfg.dim = dim;
    cfg.n_max = n_max;
    cfg.num_items = items;
    cfg.stochastic = stochastic;
    cfg.confounder = true;
    return cfg;
}

SequenceExample padded_example(const std::vector<int>& real_items, int n_max, int target) {
    SequenceExample ex;
    ex.user = 1;
    ex.items.assign(static_cast<size_t>(n_max - real_items.size()), 0);
    ex.items.insert(ex.items.end(), real_items.begin(), real_items.end());
    ex.true_length = static_cast<int>(real_items.size());
    ex.target = target;
    return ex;
}

}  // namespace

TEST_CASE("loss weight validation") {
    LossWeights w;
    CHECK(w.validate().empty());
    w.gamma = 1.5;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w = LossWeights{};
    w.alpha = -0.1;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w = LossWeights{};
    w.alpha = 0.9;
    w.gamma = 0.5;
    CHECK_FALSE(w.validate().empty());  // warn only
}

TEST_CASE("adjustment path: deterministic mode returns t == mu, fixed seed repeats") {
    ModelConfig cfg = dual_config(6, 5, 9, true);
    Model model = Model::init(cfg, RngStream(3));
    SequenceExample ex = padded_example({2, 7, 4}, 5, 1);
    RngStream r1(10);
    auto det = adjustment_forward(model, ex, r1, false);
    CHECK(det.t.data == det.mu.data);
    for (double s : det.sigma.data) CHECK(s == 0.0);

    RngStream r2(10), r3(10);
    auto a = adjustment_forward(model, ex, r2, true);
    auto b = adjustment_forward(model, ex, r3, true);
    CHECK(a.t.data == b.t.data);
    CHECK(a.t.data != a.mu.data);
    for (double s : a.sigma.data) CHECK(s > 0.0);
}

TEST_CASE("adjustment path: forced sigma matches sampled spread") {
    ModelConfig cfg = dual_config(4, 4, 6, true);
    Model model = Model::init(cfg, RngStream(5));
    // Pin the spread head: zero weights, bias such that softplus(b) = 0.1.
    Tensor& W = model.params.at("sigma.W").value;
    for (double& v : W.data) v = 0.0;
    Tensor& bias = model.params.at("sigma.b").value;
    double b0 = std::log(std::exp(0.1) - 1.0);
    for (double& v : bias.data) v = b0;

    SequenceExample ex = padded_example({1, 3}, 4, 2);
    RngStream rng(71);
    auto first = adjustment_forward(model, ex, rng, true);
    for (double s : first.sigma.data) CHECK(s == doctest::Approx(0.1).epsilon(1e-12));

    const int n = 100000;
    std::vector<double> sum(4, 0.0), sumsq(4, 0.0);
    for (int i = 0; i < n; ++i) {
        auto e = adjustment_forward(model, ex, rng, true);
        for (int j = 0; j < 4; ++j) {
            double d = e.t.data[static_cast<size_t>(j)] - e.mu.data[static_cast<size_t>(j)];
            sum[static_cast<size_t>(j)] += d;
            sumsq[static_cast<size_t>(j)] += d * d;
        }
    }
    for (int j = 0; j < 4; ++j) {
        double mean = sum[static_cast<size_t>(j)] / n;
        double var = sumsq[static_cast<size_t>(j)] / n - mean * mean;
        CHECK(std::abs(mean) < 4.0 * 0.1 / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(std::sqrt(var) - 0.1) / 0.1 < 0.02);
    }
}

TEST_CASE("the two encoders share no parameters") {
    ModelConfig cfg = dual_config(6, 5, 9, false);
    Model model = Model::init(cfg, RngStream(13));
    SequenceExample ex = padded_example({3, 8, 2, 5}, 5, 4);
    RngStream rng(1);
    Tensor s0 = confounder_forward(model, ex);
    Tensor t0 = adjustment_forward(model, ex, rng, false).mu;

    for (auto& e : model.params.entries())
        if (e.name.rfind("adj.", 0) == 0)
            for (double& v : e.value.data) v += 0.37;
    CHECK(confounder_forward(model, ex).data == s0.data);
    CHECK(adjustment_forward(model, ex, rng, false).mu.data != t0.data);

    Model model2 = Model::init(cfg, RngStream(13));
    for (auto& e : model2.params.entries())
        if (e.name.rfind("conf.", 0) == 0)
            for (double& v : e.value.data) v += 0.37;
    CHECK(adjustment_forward(model2, ex, rng, false).mu.data == t0.data);
    CHECK(confounder_forward(model2, ex).data != s0.data);
}

TEST_CASE("compression term pinned values") {
    StochasticEmbedding e;
    e.mu = Tensor::zeros({3});
    e.sigma = Tensor::full({3}, 1.0);
    CHECK(compression_term(e) == doctest::Approx(0.0).epsilon(1e-15));

    e.mu = Tensor({2}, {1.0, 1.0});
    e.sigma = Tensor({2}, {1.0, 1.0});
    CHECK(compression_term(e) == doctest::Approx(1.0).epsilon(1e-15));

    e.mu = Tensor({1}, {0.0});
    e.sigma = Tensor({1}, {2.0});
    CHECK(compression_term(e) ==
          doctest::Approx(0.5 * (4.0 - std::log(4.0) - 1.0)).epsilon(1e-12));
    CHECK(compression_term(e) == doctest::Approx(0.80685).epsilon(1e-4));

    // deterministic mode: plain half squared norm
    e.mu = Tensor({2}, {3.0, -4.0});
    e.sigma = Tensor::zeros({2});
    CHECK(compression_term(e) == doctest::Approx(12.5).epsilon(1e-15));

    // mixed exact zeros are rejected
    e.sigma = Tensor({2}, {0.0, 1.0});
    CHECK_THROWS_AS(compression_term(e), std::invalid_argument);
}

TEST_CASE("compression term matches Monte Carlo KL within 1% at 1e6 samples") {
    RngStream cfg_rng(2024);
    for (int trial = 0; trial < 3; ++trial) {
        const int d = 2 + static_cast<int>(cfg_rng.uniform_int(0, 6));  // <= 8
        StochasticEmbedding e;
        e.mu = Tensor::zeros({d});
        e.sigma = Tensor::zeros({d});
        for (int j = 0; j < d; ++j) {
            e.mu.data[static_cast<size_t>(j)] = cfg_rng.uniform() * 4.0 - 2.0;
            e.sigma.data[static_cast<size_t>(j)] = 0.5 + cfg_rng.uniform() * 1.5;
        }
        double closed = compression_term(e);

        // log N(z; mu, sigma) - log N(z; 0, 1) averaged over z ~ N(mu, sigma)
        RngStream z(3000 + static_cast<uint64_t>(trial));
        const int n = 1000000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                double sg = e.sigma.data[static_cast<size_t>(j)];
                double zi = e.mu.data[static_cast<size_t>(j)] + sg * z.normal();
                double dp = (zi - e.mu.data[static_cast<size_t>(j)]) / sg;
                acc += -std::log(sg) - 0.5 * dp * dp + 0.5 * zi * zi;
            }
        }
        double mc = acc / n;
        CHECK(std::abs(mc - closed) / closed < 0.01);
    }
}

TEST_CASE("conditional ranking loss over the dual representation") {
    // items: padding + 2 real
    Tensor M({3, 2}, {0, 0, 1, 1, 2, -1});
    DualRepresentation reps;
    reps.adjustment.mu = Tensor({2}, {1.0, 0.0});
    reps.adjustment.sigma = Tensor::zeros({2});
    reps.adjustment.t = reps.adjustment.mu;
    reps.confounder = Tensor::zeros({2});

    SUBCASE("zero confounder: combined equals adjustment-only exactly") {
        CHECK(conditional_bpr(1, {2}, reps, M, WhichRep::TS) ==
              conditional_bpr(1, {2}, reps, M, WhichRep::T));
    }
    SUBCASE("hand example through the sigmoid") {
        // t = (1,0): score(item1) = 1, score(item2) = 2; margin -1
        double expect = std::log(1.0 + std::exp(1.0));
        CHECK(conditional_bpr(1, {2}, reps, M, WhichRep::T) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("t == s doubles the combined scores") {
        reps.confounder = reps.adjustment.t;
        // margins double: -ln sigmoid(2 * (s1 - s2))
        double expect = std::log(1.0 + std::exp(2.0));
        CHECK(conditional_bpr(1, {2}, reps, M, WhichRep::TS) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("mean over several negatives") {
        double each = conditional_bpr(1, {2}, reps, M, WhichRep::T);
        CHECK(conditional_bpr(1, {2, 2, 2}, reps, M, WhichRep::T) ==
              doctest::Approx(each).epsilon(1e-12));
    }
    SUBCASE("empty negative set rejected") {
        CHECK_THROWS(conditional_bpr(1, {}, reps, M, WhichRep::T));
    }
}

TEST_CASE("weighted total: pinned substitution and masks") {
    LossWeights w;
    w.alpha = 0.1;
    w.beta = 0.01;
    w.gamma = 0.5;
    LossBreakdown b = total_loss(0.7, 0.9, 0.6, 4.0, w);
    CHECK(b.term_a == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(b.term_b == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(b.term_c == doctest::Approx(0.30).epsilon(1e-12));
    CHECK(b.term_d == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(b.total == doctest::Approx(0.33).epsilon(1e-12));
    // exact signed-sum invariant
    CHECK(b.total == ((b.term_a - b.term_b) + b.term_c) + b.term_d);

    LossWeights zero;
    zero.alpha = zero.beta = zero.gamma = 0.0;
    CHECK(total_loss(0.7, 0.9, 0.6, 4.0, zero).total == 0.7);

    LossWeights eq = w;
    eq.alpha = eq.gamma;
    CHECK(total_loss(0.7, 123.0, 0.6, 4.0, eq).term_b == 0.0);

    AblationMask m;
    m.b = false;
    LossBreakdown nb = total_loss(0.7, 0.9, 0.6, 4.0, w, m);
    CHECK(nb.term_b == 0.0);
    CHECK(nb.total == doctest::Approx(0.69).epsilon(1e-12));
    m = AblationMask{};
    m.a = false;
    CHECK(total_loss(0.7, 0.9, 0.6, 4.0, w, m).term_a == 0.0);
    m = AblationMask{};
    m.c = false;
    CHECK(total_loss(0.7, 0.9, 0.6, 4.0, w, m).term_c == 0.0);
    m = AblationMask{};
    m.d = false;
    CHECK(total_loss(0.7, 0.9, 0.6, 4.0, w, m).term_d == 0.0);
}

TEST_CASE("inference uses only the deterministic adjustment path") {
    ModelConfig cfg = dual_config(8, 6, 12, true);
    Model model = Model::init(cfg, RngStream(29));
    SequenceExample ex = padded_example({4, 11, 2, 7}, 6, 3);
    Scores s1 = inference_scores(model, ex);
    Scores s2 = inference_scores(model, ex);
    CHECK(s1.values == s2.values);  // no sampling at test time
    CHECK(s1.values[0] == -std::numeric_limits<double>::infinity());
    CHECK(s1.values.size() == 13);

    // corrupt the confounder encoder: scores must not move
    RngStream noise(99);
    for (auto& e : model.params.entries())
        if (e.name.rfind("conf.", 0) == 0)
            for (double& v : e.value.data) v = noise.normal();
    CHECK(inference_scores(model, ex).values == s1.values);

    // corrupt the adjustment encoder: scores must move
    for (auto& e : model.params.entries())
        if (e.name.rfind("adj.", 0) == 0)
            for (double& v : e.value.data) v = noise.normal();
    CHECK(inference_scores(model, ex).values != s1.values);
}

TEST_CASE("batched objective gradient matches finite differences") {
    ModelConfig cfg = dual_config(8, 5, 20, true);
    Model model = Model::init(cfg, RngStream(101));
    std::vector<SequenceExample> exs = {padded_example({3, 15, 7}, 5, 9),
                                        padded_example({1, 2, 18, 4, 12}, 5, 6),
                                        padded_example({20, 5}, 5, 11)};
    Batch batch = make_batch(exs, cfg);
    std::vector<int> negatives = {14, 8, 19};
    ObjectiveConfig ocfg;
    ocfg.stochastic = true;

    auto eval = [&](Model& m) {
        Graph g;
        GraphBinding bp = bind(g, m);
        RngStream srng(555);  // same draw for every evaluation
        StepLoss step = build_objective(g, bp, m, batch, negatives, ocfg, srng);
        return std::pair<Graph, Graph::Var>(std::move(g), step.total);
    };

    Graph g;
    GraphBinding bp = bind(g, model);
    RngStream srng(555);
    StepLoss step = build_objective(g, bp, model, batch, negatives, ocfg, srng);
    g.backward(step.total);

    const double h = 1e-5;
    double worst = 0.0;
    for (auto& entry : model.params.entries()) {
        const Tensor& analytic = g.grad(bp.at(entry.name));
        // probe a deterministic subset of coordinates per tensor
        size_t n = entry.value.data.size();
        size_t stride = std::max<size_t>(1, n / 7);
        for (size_t i = 0; i < n; i += stride) {
            double saved = entry.value.data[i];
            entry.value.data[i] = saved + h;
            auto [gp, vp] = eval(model);
            double up = gp.value(vp).data[0];
            entry.value.data[i] = saved - h;
            auto [gm, vm] = eval(model);
            double down = gm.value(vm).data[0];
            entry.value.data[i] = saved;
            double fd = (up - down) / (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(analytic.data[i]), 1e-3});
            worst = std::max(worst, std::abs(fd - analytic.data[i]) / denom);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("breakdown invariant holds on a live objective step") {
    ModelConfig cfg = dual_config(6, 4, 10, true);
    Model model = Model::init(cfg, RngStream(7));
    std::vector<SequenceExample> exs = {padded_example({2, 9, 4}, 4, 5)};
    Batch batch = make_batch(exs, cfg);
    ObjectiveConfig ocfg;
    ocfg.stochastic = true;
    Graph g;
    GraphBinding bp = bind(g, model);
    RngStream srng(8);
    StepLoss step = build_objective(g, bp, model, batch, {7}, ocfg, srng);
    const LossBreakdown& b = step.breakdown;
    CHECK(b.total == ((b.term_a - b.term_b) + b.term_c) + b.term_d);
    CHECK(g.value(step.total).data[0] == doctest::Approx(b.total).epsilon(1e-12));
}

// ---- exact discrete checks of the information identities ----

TEST_CASE("chain-rule rewrite holds when t and s are independent given y") {
    using info::Joint3;
    // p(t,s,y) = p(y) p(t|y) p(s|y)
    Joint3 p(2, 3, 2);
    double py[2] = {0.4, 0.6};
    double pt[2][2] = {{0.8, 0.2}, {0.3, 0.7}};
    double ps[2][3] = {{0.5, 0.25, 0.25}, {0.1, 0.6, 0.3}};
    for (int y = 0; y < 2; ++y)
        for (int t = 0; t < 2; ++t)
            for (int s = 0; s < 3; ++s) p.at(t, s, y) = py[y] * pt[y][t] * ps[y][s];
    p.require_normalized();
    auto rep = info::check_chain_rule(p);
    CHECK(rep.premise_holds);
    CHECK(std::abs(rep.premise) < 1e-12);
    CHECK(std::abs(rep.rewrite_residual) < 1e-12);
}

TEST_CASE("chain-rule rewrite flagged when t == s violates the premise") {
    using info::Joint3;
    Joint3 p(2, 2, 2);
    // t identical to s, y noisy function of t
    double pt[2] = {0.35, 0.65};
    double py_t[2][2] = {{0.9, 0.1}, {0.2, 0.8}};
    for (int t = 0; t < 2; ++t)
        for (int y = 0; y < 2; ++y) p.at(t, t, y) += pt[t] * py_t[t][y];
    p.require_normalized();
    auto rep = info::check_chain_rule(p);
    CHECK_FALSE(rep.premise_holds);
    CHECK(rep.premise > 0.0);
    // deterministic copy: shared information is the full entropy of t
    CHECK(rep.mi_ts == doctest::Approx(rep.entropy_t).epsilon(1e-12));
    CHECK(std::abs(rep.rewrite_residual) > 1e-6);
}

TEST_CASE("variational bound: any q upper-bounds, the true marginal is tight") {
    std::vector<std::vector<double>> p_t_given_x = {
        {0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}, {0.3, 0.4, 0.3}};
    std::vector<double> p_x = {0.5, 0.3, 0.2};

    // true marginal
    std::vector<double> marginal(3, 0.0);
    for (size_t x = 0; x < 3; ++x)
        for (size_t t = 0; t < 3; ++t) marginal[t] += p_x[x] * p_t_given_x[x][t];
    auto tight = info::check_variational_bound(p_t_given_x, p_x, marginal);
    CHECK(tight.holds);
    CHECK(tight.kl_to_q == doctest::Approx(tight.kl_to_marginal).epsilon(1e-12));

    RngStream rng(17);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> q(3);
        double z = 0.0;
        for (double& v : q) {
            v = rng.uniform() + 1e-3;
            z += v;
        }
        for (double& v : q) v /= z;
        auto rep = info::check_variational_bound(p_t_given_x, p_x, q);
        CHECK(rep.holds);
        CHECK(rep.kl_to_q >= rep.kl_to_marginal - 1e-12);
        CHECK(rep.gibbs_slack >= -1e-12);
    }

    std::vector<double> bad = {0.5, 0.6, 0.2};
    CHECK_THROWS(info::check_variational_bound(p_t_given_x, p_x, bad));
}

#include "seqrec/train.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

using nlohmann::json;

// Items each user has interacted with, across all splits; negatives are
// sampled outside this set.
std::vector<std::unordered_set<int>> user_item_sets(const DatasetSplits& splits) {
    std::vector<std::unordered_set<int>> sets(
        static_cast<size_t>(splits.catalog.num_users()) + 1);
    auto absorb = [&](const std::vector<SequenceExample>& v) {
        for (const auto& ex : v) {
            auto& s = sets[static_cast<size_t>(ex.user)];
            for (int item : ex.items)
                if (item > 0) s.insert(item);
            s.insert(ex.target);
        }
    };
    absorb(splits.train);
    absorb(splits.validation);
    absorb(splits.test);
    return sets;
}

int sample_negative(RngStream& rng, int num_items, const std::unordered_set<int>& owned,
                    int target) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        int cand = static_cast<int>(rng.uniform_int(1, num_items));
        if (!owned.count(cand)) return cand;
    }
    // Dense user fallback: anything but the positive.
    for (int attempt = 0;; ++attempt) {
        int cand = static_cast<int>(rng.uniform_int(1, num_items));
        if (cand != target) return cand;
    }
}

ModelConfig model_config_from(const TrainConfig& c, int num_items) {
    ModelConfig mc;
    mc.variant = c.variant;
    mc.dim = c.dim;
    mc.n_max = c.n_max;
    mc.layers = c.layers;
    mc.heads = c.heads;
    mc.num_items = num_items;
    mc.stochastic = c.mode == ObjectiveMode::Framework && c.stochastic;
    mc.confounder = c.mode == ObjectiveMode::Framework;
    mc.combine = c.combine;
    return mc;
}

}  // namespace

std::string TrainConfig::to_json() const {
    json j;
    j["variant"] = to_string(variant);
    j["dim"] = dim;
    j["batch_size"] = batch_size;
    j["n_max"] = n_max;
    j["layers"] = layers;
    j["heads"] = heads;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["alpha"] = weights.alpha;
    j["beta"] = weights.beta;
    j["gamma"] = weights.gamma;
    j["mask"] = {{"a", mask.a}, {"b", mask.b}, {"c", mask.c}, {"d", mask.d}};
    j["stochastic"] = stochastic;
    j["combine"] = combine == CombineRule::Sum ? "sum" : "concat";
    j["mode"] = mode == ObjectiveMode::Base ? "base" : "framework";
    j["detach_confounder"] = detach_confounder;
    j["stop_b_grad_to_confounder"] = stop_b_grad_to_confounder;
    j["max_epochs"] = max_epochs;
    j["patience"] = patience;
    j["n_negatives"] = n_negatives;
    j["seed"] = seed;
    return j.dump();
}

TrainResult train(const DatasetSplits& splits, const TrainConfig& config, std::ostream* loss_log,
                  std::ostream* progress) {
    if (splits.train.empty()) throw DataError("train: empty train split");
    if (config.batch_size < 1 || config.max_epochs < 1 || config.patience < 0 ||
        config.n_negatives < 1)
        throw ConfigError("train: invalid batch/epoch/patience/negative settings");
    std::string warning = config.weights.validate();
    if (!warning.empty() && progress) *progress << "warning: " << warning << '\n';

    int num_items = splits.catalog.num_items();
    RngStream root(config.seed);
    Model model = Model::init(model_config_from(config, num_items), root.derive("init"));
    RngStream order_rng = root.derive("batch-order");
    RngStream neg_rng = root.derive("negatives");
    RngStream sample_rng = root.derive("reparameterize");

    ObjectiveConfig ocfg;
    ocfg.weights = config.weights;
    ocfg.mask = config.mask;
    ocfg.stochastic = config.stochastic && config.mode == ObjectiveMode::Framework;
    ocfg.detach_confounder =
        config.mode == ObjectiveMode::Base || config.detach_confounder;
    ocfg.stop_b_grad_to_confounder = config.stop_b_grad_to_confounder;
    ocfg.combine = config.combine;

    auto item_sets = user_item_sets(splits);

    TrainResult result{model};
    int64_t step = 0;
    std::vector<size_t> order(splits.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        order_rng.shuffle(order);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t count =
                std::min(static_cast<size_t>(config.batch_size), order.size() - start);
            std::vector<SequenceExample> examples;
            examples.reserve(count);
            for (size_t i = 0; i < count; ++i)
                examples.push_back(splits.train[order[start + i]]);

            std::vector<int> negatives;
            negatives.reserve(count * static_cast<size_t>(config.n_negatives));
            for (const auto& ex : examples)
                for (int j = 0; j < config.n_negatives; ++j)
                    negatives.push_back(sample_negative(
                        neg_rng, num_items, item_sets[static_cast<size_t>(ex.user)], ex.target));

            Graph g;
            GraphBinding bp = bind(g, model);
            Batch batch = make_batch(examples, model.cfg);
            LossBreakdown breakdown;
            Graph::Var total;
            if (config.mode == ObjectiveMode::Base) {
                Graph::Var emb = embed_batch(g, bp, batch, model.cfg);
                Graph::Var h = encode_batch(g, bp, emb, batch, model.cfg, "adj.");
                total = bpr_from_representation(g, bp, h, batch.targets, negatives);
                breakdown.term_a = g.value(total).data[0];
                breakdown.total = breakdown.term_a;
            } else {
                StepLoss sl = build_objective(g, bp, model, batch, negatives, ocfg, sample_rng);
                total = sl.total;
                breakdown = sl.breakdown;
            }
            if (!std::isfinite(g.value(total).data[0]))
                throw DivergenceError("non-finite loss at step " + std::to_string(step) +
                                      " (epoch " + std::to_string(epoch) + ")");
            g.backward(total);

            for (auto& e : model.params.entries()) {
                Tensor grad = g.grad(bp.at(e.name));
                if (e.name == "item_emb")
                    for (int64_t j = 0; j < model.cfg.dim; ++j) grad.data[j] = 0.0;
                adam_step(e.value, grad, e.opt, config.lr, config.weight_decay);
            }
            model.zero_padding_row();

            if (loss_log) {
                json rec;
                rec["step"] = step;
                rec["term_a"] = breakdown.term_a;
                rec["term_b"] = breakdown.term_b;
                rec["term_c"] = breakdown.term_c;
                rec["term_d"] = breakdown.term_d;
                rec["total"] = breakdown.total;
                *loss_log << rec.dump() << '\n';
            }
            ++step;
        }

        EvalReport val = evaluate(model, splits.validation);
        double ndcg10 = val.ndcg.at(10);
        if (progress)
            *progress << "epoch " << epoch << " val NDCG@10 " << std::setprecision(5) << ndcg10
                      << '\n';
        if (result.best_epoch < 0 || ndcg10 > result.best_val_ndcg10) {
            result.best_val_ndcg10 = ndcg10;
            result.best_epoch = epoch;
            result.model = model;
        }
        result.epochs_run = epoch + 1;
        if (epoch - result.best_epoch > config.patience) break;
    }
    result.steps_run = step;
    return result;
}

std::vector<AblationRow> ablate(const DatasetSplits& splits, const TrainConfig& base_config,
                                std::ostream* progress) {
    struct Variant {
        const char* name;
        void (*apply)(AblationMask&);
    };
    static const Variant variants[] = {
        {"raw", [](AblationMask&) {}},
        {"w/o (1)", [](AblationMask& m) { m.a = false; }},
        {"w/o (2)", [](AblationMask& m) { m.b = false; }},
        {"w/o (3)", [](AblationMask& m) { m.c = false; }},
    };
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        TrainConfig cfg = base_config;
        cfg.mode = ObjectiveMode::Framework;
        v.apply(cfg.mask);
        if (progress) *progress << "ablation variant: " << v.name << '\n';
        TrainResult r = train(splits, cfg, nullptr, progress);
        EvalReport rep = evaluate(r.model, splits.test);
        rep.seed = cfg.seed;
        rep.config_echo = cfg.to_json();
        rows.push_back({v.name, std::move(rep)});
    }
    return rows;
}

std::string ablation_table_text(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "variant" << std::right << std::setw(10) << "HR@20"
       << std::setw(10) << "NDCG@20" << '\n';
    os << std::fixed << std::setprecision(4);
    for (const auto& row : rows)
        os << std::left << std::setw(10) << row.name << std::right << std::setw(10)
           << row.report.hr.at(20) << std::setw(10) << row.report.ndcg.at(20) << '\n';
    return os.str();
}

std::string ablation_table_json(const std::vector<AblationRow>& rows) {
    json j = json::array();
    for (const auto& row : rows) {
        json r;
        r["variant"] = row.name;
        r["hr@20"] = row.report.hr.at(20);
        r["ndcg@20"] = row.report.ndcg.at(20);
        r["report"] = json::parse(row.report.to_json());
        j.push_back(std::move(r));
    }
    return j.dump(2);
}

std::string comparison_table_text(const EvalReport& base, const EvalReport& framework) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "model";
    for (int k : kEvalCutoffs) os << std::right << std::setw(10) << ("HR@" + std::to_string(k));
    for (int k : kEvalCutoffs) os << std::right << std::setw(10) << ("NDCG@" + std::to_string(k));
    os << '\n' << std::fixed << std::setprecision(4);
    auto row = [&](const char* name, const EvalReport& r) {
        os << std::left << std::setw(16) << name;
        for (int k : kEvalCutoffs) os << std::right << std::setw(10) << r.hr.at(k);
        for (int k : kEvalCutoffs) os << std::right << std::setw(10) << r.ndcg.at(k);
        os << '\n';
    };
    row("base", base);
    row("framework", framework);
    os << std::left << std::setw(16) << "improvement(%)" << std::setprecision(2);
    auto imp = [](double b, double f) { return b > 0.0 ? (f - b) / b * 100.0 : 0.0; };
    for (int k : kEvalCutoffs)
        os << std::right << std::setw(10) << imp(base.hr.at(k), framework.hr.at(k));
    for (int k : kEvalCutoffs)
        os << std::right << std::setw(10) << imp(base.ndcg.at(k), framework.ndcg.at(k));
    os << '\n';
    return os.str();
}

}  // namespace seqrec

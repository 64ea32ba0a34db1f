// seqrec command-line front end: prepare / synth / train / eval / ablate / check.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqrec/data.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/infotheory.hpp"
#include "seqrec/metrics.hpp"
#include "seqrec/synthetic.hpp"
#include "seqrec/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqrec;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitData = 4;
constexpr int kExitDivergence = 5;

// Deterministic run id from the config echo, so identical configurations land
// in identical output paths and re-runs are byte-comparable.
std::string run_id(const std::string& echo) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : echo) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf).substr(0, 12);
}

void write_file(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << content;
    if (!content.empty() && content.back() != '\n') os << '\n';
}

struct TrainFlags {
    std::string variant = "gru";
    std::string mode = "framework";
    std::string combine = "sum";
    TrainConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--variant", variant, "encoder: gru, causal, bidirectional")
            ->check(CLI::IsMember({"gru", "causal", "bidirectional"}))
            ->capture_default_str();
        cmd->add_option("--mode", mode, "objective: base (plain BPR) or framework")
            ->check(CLI::IsMember({"base", "framework"}))
            ->capture_default_str();
        cmd->add_option("--dim", cfg.dim, "embedding dimension")->capture_default_str();
        cmd->add_option("--batch-size", cfg.batch_size, "mini-batch size")->capture_default_str();
        cmd->add_option("--n-max", cfg.n_max, "history length")->capture_default_str();
        cmd->add_option("--layers", cfg.layers, "attention layers")->capture_default_str();
        cmd->add_option("--heads", cfg.heads, "attention heads")->capture_default_str();
        cmd->add_option("--lr", cfg.lr, "learning rate (grid 1e-3, 5e-4, 1e-4)")
            ->capture_default_str();
        cmd->add_option("--weight-decay", cfg.weight_decay,
                        "L2 weight decay (grid 1e-4, 1e-6, 1e-8, 0)")
            ->capture_default_str();
        cmd->add_option("--alpha", cfg.weights.alpha, "weight of the spurious-path term")
            ->capture_default_str();
        cmd->add_option("--beta", cfg.weights.beta, "weight of the compression term")
            ->capture_default_str();
        cmd->add_option("--gamma", cfg.weights.gamma, "weight of the joint-path term")
            ->capture_default_str();
        cmd->add_flag("--stochastic", cfg.stochastic, "sample the adjustment embedding");
        cmd->add_option("--combine", combine, "t+s combination: sum or concat")
            ->check(CLI::IsMember({"sum", "concat"}))
            ->capture_default_str();
        cmd->add_flag("--detach-confounder", cfg.detach_confounder,
                      "skip the spurious encoder entirely");
        cmd->add_option("--max-epochs", cfg.max_epochs, "epoch cap")->capture_default_str();
        cmd->add_option("--patience", cfg.patience, "early-stop patience (validation NDCG@10)")
            ->capture_default_str();
        cmd->add_option("--negatives", cfg.n_negatives, "sampled negatives per positive")
            ->capture_default_str();
        cmd->add_option("--seed", cfg.seed, "random seed")->required();
        cmd->add_option("--drop-term", drop_terms,
                        "ablation: drop loss terms (any of a, b, c, d)")
            ->check(CLI::IsMember({"a", "b", "c", "d"}));
    }

    TrainConfig resolve() const {
        TrainConfig out = cfg;
        out.variant = variant_from_name(variant);
        out.mode = mode == "base" ? ObjectiveMode::Base : ObjectiveMode::Framework;
        out.combine = combine == "concat" ? CombineRule::ConcatProject : CombineRule::Sum;
        for (const std::string& t : drop_terms) {
            if (t == "a") out.mask.a = false;
            if (t == "b") out.mask.b = false;
            if (t == "c") out.mask.c = false;
            if (t == "d") out.mask.d = false;
        }
        std::string warning = out.weights.validate();
        if (!warning.empty()) std::cerr << "warning: " << warning << '\n';
        return out;
    }

    std::vector<std::string> drop_terms;
};

int cmd_prepare(const std::string& input, std::string format_name, int core, int n_max,
                const std::string& out_dir) {
    if (format_name.empty()) {
        format_name = fs::path(input).extension().string();
        if (!format_name.empty() && format_name.front() == '.') format_name.erase(0, 1);
    }
    LogFormat format = format_from_name(format_name);
    IngestReport report;
    auto interactions = ingest(input, format, &report);
    if (core > 0) interactions = five_core_filter(std::move(interactions), core);
    if (interactions.empty()) throw DataError("no interactions left after filtering");
    DatasetSplits splits = build_splits(interactions, n_max);
    DatasetStats st = stats(splits);

    save_splits(splits, (fs::path(out_dir) / "splits").string());
    json echo = {{"command", "prepare"}, {"input", input},   {"core", core},
                 {"n_max", n_max},       {"parsed", report.parsed},
                 {"malformed", report.malformed}};
    json out = json::parse(stats_json(st));
    out["config_echo"] = echo;
    write_file(fs::path(out_dir) / "stats.json", out.dump(2));
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_synth(const SynthConfig& cfg, const std::string& out_dir) {
    auto [splits, gt] = generate(cfg);
    save_splits(splits, (fs::path(out_dir) / "splits").string());
    fs::create_directories(out_dir);
    save_ground_truth(gt, cfg, (fs::path(out_dir) / "ground_truth.json").string());
    DatasetStats st = stats(splits);
    json out = json::parse(stats_json(st));
    out["config_echo"] = {{"command", "synth"},
                          {"n_users", cfg.n_users},
                          {"n_items", cfg.n_items},
                          {"d_true", cfg.d_true},
                          {"n_tags", cfg.n_tags},
                          {"history_length", cfg.history_length},
                          {"spurious_strength", cfg.spurious_strength},
                          {"flip_at_test", cfg.flip_at_test},
                          {"n_max", cfg.n_max},
                          {"seed", cfg.seed}};
    write_file(fs::path(out_dir) / "stats.json", out.dump(2));
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_train(const std::string& splits_dir, const TrainFlags& flags, const std::string& out_dir) {
    DatasetSplits splits = load_splits(splits_dir);
    TrainConfig cfg = flags.resolve();
    cfg.n_max = splits.n_max;
    std::string echo = cfg.to_json();
    std::string id = run_id(echo);

    fs::create_directories(fs::path(out_dir) / "reports");
    std::ofstream loss_log(fs::path(out_dir) / "reports" / ("loss_" + id + ".jsonl"));
    TrainResult result = train(splits, cfg, &loss_log, &std::cerr);

    fs::create_directories(fs::path(out_dir) / "checkpoints");
    std::string ckpt = (fs::path(out_dir) / "checkpoints" / (id + ".json")).string();
    save_checkpoint(result.model, ckpt, echo);

    EvalReport val = evaluate(result.model, splits.validation);
    EvalReport test = evaluate(result.model, splits.test);
    val.seed = test.seed = cfg.seed;
    val.config_echo = test.config_echo = echo;
    json report = {{"run_id", id},
                   {"checkpoint", ckpt},
                   {"best_epoch", result.best_epoch},
                   {"epochs_run", result.epochs_run},
                   {"steps_run", result.steps_run},
                   {"best_val_ndcg10", result.best_val_ndcg10},
                   {"validation", json::parse(val.to_json())},
                   {"test", json::parse(test.to_json())},
                   {"config_echo", json::parse(echo)}};
    write_file(fs::path(out_dir) / "reports" / ("train_" + id + ".json"), report.dump(2));
    std::cout << "run " << id << "  best epoch " << result.best_epoch << '\n'
              << test.to_text() << '\n';
    return 0;
}

int cmd_eval(const std::string& splits_dir, const std::string& checkpoint,
             const std::string& which, bool mask_history, const std::string& out_path) {
    DatasetSplits splits = load_splits(splits_dir);
    std::string echo;
    Model model = load_checkpoint(checkpoint, &echo);
    const auto& split = which == "validation" ? splits.validation : splits.test;
    EvalReport rep = evaluate(model, split, mask_history);
    rep.config_echo = echo;
    std::cout << rep.to_text() << '\n';
    if (!out_path.empty()) {
        json out = json::parse(rep.to_json());
        out["split"] = which;
        out["checkpoint"] = checkpoint;
        write_file(out_path, out.dump(2));
    }
    return 0;
}

int cmd_ablate(const std::string& splits_dir, const TrainFlags& flags,
               const std::string& out_dir) {
    DatasetSplits splits = load_splits(splits_dir);
    TrainConfig cfg = flags.resolve();
    cfg.n_max = splits.n_max;
    auto rows = ablate(splits, cfg, &std::cerr);
    std::string text = ablation_table_text(rows);
    std::cout << text;
    if (!out_dir.empty()) {
        std::string echo = cfg.to_json();
        std::string id = run_id(echo);
        json out = {{"rows", json::parse(ablation_table_json(rows))},
                    {"config_echo", json::parse(echo)}};
        write_file(fs::path(out_dir) / "reports" / ("ablation_" + id + ".json"), out.dump(2));
    }
    return 0;
}

// Self-test: the analytic identities and the gradient of the full objective.
int cmd_check() {
    int failures = 0;
    auto verdict = [&](const std::string& name, bool ok, const std::string& detail = {}) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name;
        if (!detail.empty()) std::cout << "  (" << detail << ")";
        std::cout << '\n';
        if (!ok) ++failures;
    };

    {  // chain-rule rewrite on conditionally independent tables
        double worst = 0.0;
        RngStream rng(1);
        for (int trial = 0; trial < 50; ++trial) {
            info::Joint3 p(2, 2, 2);
            double py[2] = {rng.uniform() + 0.1, rng.uniform() + 0.1};
            double pt[2][2], ps[2][2];
            for (int y = 0; y < 2; ++y) {
                pt[y][0] = rng.uniform() + 0.05;
                pt[y][1] = rng.uniform() + 0.05;
                ps[y][0] = rng.uniform() + 0.05;
                ps[y][1] = rng.uniform() + 0.05;
                double zt = pt[y][0] + pt[y][1], zs = ps[y][0] + ps[y][1];
                pt[y][0] /= zt;
                pt[y][1] /= zt;
                ps[y][0] /= zs;
                ps[y][1] /= zs;
            }
            double zy = py[0] + py[1];
            for (int y = 0; y < 2; ++y)
                for (int t = 0; t < 2; ++t)
                    for (int s = 0; s < 2; ++s) p.at(t, s, y) = py[y] / zy * pt[y][t] * ps[y][s];
            auto rep = info::check_chain_rule(p);
            if (!rep.premise_holds) worst = 1.0;
            worst = std::max(worst, std::abs(rep.rewrite_residual));
        }
        verdict("mutual-information rewrite on planted tables", worst < 1e-12,
                "residual " + std::to_string(worst));
    }
    {  // variational bound for random q
        std::vector<std::vector<double>> p_t_given_x = {
            {0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}, {0.3, 0.4, 0.3}};
        std::vector<double> p_x = {0.5, 0.3, 0.2};
        RngStream rng(2);
        bool ok = true;
        for (int i = 0; i < 100; ++i) {
            std::vector<double> q(3);
            double z = 0;
            for (double& v : q) {
                v = rng.uniform() + 1e-3;
                z += v;
            }
            for (double& v : q) v /= z;
            ok = ok && info::check_variational_bound(p_t_given_x, p_x, q).holds;
        }
        verdict("variational upper bound over 100 random q", ok);
    }
    {  // gradient of the full objective vs finite differences
        ModelConfig mc;
        mc.dim = 8;
        mc.n_max = 5;
        mc.num_items = 20;
        mc.stochastic = true;
        mc.confounder = true;
        Model model = Model::init(mc, RngStream(3));
        std::vector<SequenceExample> exs(2);
        exs[0].items = {0, 0, 3, 15, 7};
        exs[0].true_length = 3;
        exs[0].target = 9;
        exs[1].items = {1, 2, 18, 4, 12};
        exs[1].true_length = 5;
        exs[1].target = 6;
        Batch batch = make_batch(exs, mc);
        std::vector<int> negatives = {14, 8};
        ObjectiveConfig ocfg;
        ocfg.stochastic = true;

        auto value = [&](Model& m) {
            Graph g;
            GraphBinding bp = bind(g, m);
            RngStream srng(555);
            StepLoss s = build_objective(g, bp, m, batch, negatives, ocfg, srng);
            return g.value(s.total).data[0];
        };
        Graph g;
        GraphBinding bp = bind(g, model);
        RngStream srng(555);
        StepLoss step = build_objective(g, bp, model, batch, negatives, ocfg, srng);
        g.backward(step.total);
        double worst = 0.0;
        const double h = 1e-5;
        for (auto& entry : model.params.entries()) {
            const Tensor& analytic = g.grad(bp.at(entry.name));
            size_t n = entry.value.data.size();
            for (size_t i = 0; i < n; i += std::max<size_t>(1, n / 5)) {
                double saved = entry.value.data[i];
                entry.value.data[i] = saved + h;
                double up = value(model);
                entry.value.data[i] = saved - h;
                double down = value(model);
                entry.value.data[i] = saved;
                double fd = (up - down) / (2 * h);
                double denom = std::max({std::abs(fd), std::abs(analytic.data[i]), 1e-3});
                worst = std::max(worst, std::abs(fd - analytic.data[i]) / denom);
            }
        }
        verdict("objective gradient vs finite differences", worst < 1e-4,
                "max rel err " + std::to_string(worst));
    }
    {  // closed-form compression vs Monte Carlo
        RngStream rng(4);
        double worst = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            int d = 4;
            StochasticEmbedding e;
            e.mu = Tensor::zeros({d});
            e.sigma = Tensor::zeros({d});
            for (int j = 0; j < d; ++j) {
                e.mu.data[static_cast<size_t>(j)] = rng.uniform() * 4 - 2;
                e.sigma.data[static_cast<size_t>(j)] = 0.5 + rng.uniform() * 1.5;
            }
            double closed = compression_term(e);
            RngStream z(40 + static_cast<uint64_t>(trial));
            double acc = 0.0;
            const int n = 1000000;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) {
                    double sg = e.sigma.data[static_cast<size_t>(j)];
                    double eps = z.normal();
                    double zi = e.mu.data[static_cast<size_t>(j)] + sg * eps;
                    acc += -std::log(sg) - 0.5 * eps * eps + 0.5 * zi * zi;
                }
            worst = std::max(worst, std::abs(acc / n - closed) / closed);
        }
        verdict("closed-form compression vs Monte Carlo", worst < 0.01,
                "max rel err " + std::to_string(worst));
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential recommender with an invariant-representation objective"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file (flags win)");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "ingest a log and build leave-one-out splits");
    std::string input, format_name, out_dir = "out";
    int core = 5, n_max = 20;
    prepare->add_option("--input", input, "interaction log (csv, tsv, or jsonl)")->required();
    prepare->add_option("--format", format_name, "override format: csv, tsv, jsonl");
    prepare->add_option("--core", core, "k-core filter threshold, 0 disables")
        ->capture_default_str();
    prepare->add_option("--n-max", n_max, "history length")->capture_default_str();
    prepare->add_option("--out", out_dir, "output directory")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "generate the planted-confounder benchmark");
    SynthConfig scfg;
    std::string synth_out = "synth";
    bool no_flip = false;
    synth->add_option("--users", scfg.n_users)->capture_default_str();
    synth->add_option("--items", scfg.n_items)->capture_default_str();
    synth->add_option("--d-true", scfg.d_true, "latent preference dimension")
        ->capture_default_str();
    synth->add_option("--archetypes", scfg.n_archetypes, "shared preference profiles")
        ->capture_default_str();
    synth->add_option("--pref-noise", scfg.pref_noise, "per-user deviation from the archetype")
        ->capture_default_str();
    synth->add_option("--tags", scfg.n_tags, "confounder tag alphabet")->capture_default_str();
    synth->add_option("--history", scfg.history_length)->capture_default_str();
    synth->add_option("--rho", scfg.spurious_strength, "spurious-draw probability")
        ->capture_default_str();
    synth->add_flag("--no-flip", no_flip, "keep the spurious correlation at test time");
    synth->add_option("--n-max", scfg.n_max)->capture_default_str();
    synth->add_option("--seed", scfg.seed)->required();
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "train and write checkpoint + reports");
    std::string train_splits, train_out = "out";
    TrainFlags tflags;
    train_cmd->add_option("--splits", train_splits, "directory written by prepare/synth")
        ->required();
    train_cmd->add_option("--out", train_out, "output directory")->capture_default_str();
    tflags.attach(train_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string eval_splits, eval_ckpt, eval_which = "test", eval_out;
    bool mask_history = false;
    eval_cmd->add_option("--splits", eval_splits)->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--split", eval_which, "test or validation")
        ->check(CLI::IsMember({"test", "validation"}))
        ->capture_default_str();
    eval_cmd->add_flag("--mask-history", mask_history, "drop history items from the ranking");
    eval_cmd->add_option("--out", eval_out, "write the json report here");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "four-row term-ablation table");
    std::string ablate_splits, ablate_out = "out";
    TrainFlags aflags;
    ablate_cmd->add_option("--splits", ablate_splits)->required();
    ablate_cmd->add_option("--out", ablate_out, "output directory")->capture_default_str();
    aflags.attach(ablate_cmd);

    // check
    app.add_subcommand("check", "run the analytic identity and gradient self-tests");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(input, format_name, core, n_max, out_dir);
        if (synth->parsed()) {
            scfg.flip_at_test = !no_flip;
            scfg.validate();
            return cmd_synth(scfg, synth_out);
        }
        if (train_cmd->parsed()) return cmd_train(train_splits, tflags, train_out);
        if (eval_cmd->parsed())
            return cmd_eval(eval_splits, eval_ckpt, eval_which, mask_history, eval_out);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_splits, aflags, ablate_out);
        return cmd_check();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

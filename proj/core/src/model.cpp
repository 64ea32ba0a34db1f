#include "seqrec/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/ops.hpp"

namespace seqrec {

namespace {

using nlohmann::json;

constexpr double kEmbInitStd = 0.05;

void add_encoder_params(Model& m, const std::string& prefix, const RngStream& seed_stream) {
    const ModelConfig& cfg = m.cfg;
    int64_t d = cfg.dim;
    double w_std = 1.0 / std::sqrt(static_cast<double>(d));
    auto init = [&](const std::string& name, std::vector<int64_t> shape, double std) {
        RngStream rng = seed_stream.derive(prefix + name);
        m.params.add(prefix + name, rng.normal_tensor(std::move(shape), std));
    };
    if (cfg.variant == EncoderVariant::RecurrentGated) {
        for (const char* g : {"z", "r", "c"}) {
            init(std::string("gru.W") + g, {d, d}, w_std);
            init(std::string("gru.U") + g, {d, d}, w_std);
            m.params.add(prefix + "gru.b" + g, Tensor::zeros({1, d}));
        }
    } else {
        for (int l = 0; l < cfg.layers; ++l) {
            std::string lp = "attn" + std::to_string(l) + ".";
            for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) init(lp + w, {d, d}, w_std);
            init(lp + "W1", {d, d}, w_std);
            init(lp + "W2", {d, d}, w_std);
            m.params.add(prefix + lp + "b1", Tensor::zeros({1, d}));
            m.params.add(prefix + lp + "b2", Tensor::zeros({1, d}));
        }
    }
}

}  // namespace

std::string to_string(EncoderVariant v) {
    switch (v) {
        case EncoderVariant::RecurrentGated: return "recurrent-gated";
        case EncoderVariant::SelfAttentionCausal: return "self-attention-causal";
        case EncoderVariant::SelfAttentionBidirectional: return "self-attention-bidirectional";
    }
    return "?";
}

EncoderVariant variant_from_name(const std::string& name) {
    if (name == "recurrent-gated" || name == "gru") return EncoderVariant::RecurrentGated;
    if (name == "self-attention-causal" || name == "causal")
        return EncoderVariant::SelfAttentionCausal;
    if (name == "self-attention-bidirectional" || name == "bidirectional")
        return EncoderVariant::SelfAttentionBidirectional;
    throw ConfigError("unknown encoder variant: " + name);
}

Model Model::init(const ModelConfig& cfg, const RngStream& seed_stream) {
    if (cfg.dim < 1 || cfg.n_max < 1 || cfg.num_items < 1 || cfg.layers < 1 || cfg.heads < 1 ||
        cfg.dim % cfg.heads != 0)
        throw ConfigError("invalid model config");
    Model m;
    m.cfg = cfg;
    {
        RngStream rng = seed_stream.derive("item_emb");
        Tensor M = rng.normal_tensor({cfg.num_items + 1, cfg.dim}, kEmbInitStd);
        for (int64_t j = 0; j < cfg.dim; ++j) M.data[j] = 0.0;  // padding row
        m.params.add("item_emb", std::move(M));
    }
    {
        RngStream rng = seed_stream.derive("pos_emb");
        m.params.add("pos_emb", rng.normal_tensor({cfg.n_max, cfg.dim}, kEmbInitStd));
    }
    add_encoder_params(m, "adj.", seed_stream);
    if (cfg.confounder) add_encoder_params(m, "conf.", seed_stream);
    if (cfg.stochastic) {
        RngStream rng = seed_stream.derive("sigma.W");
        m.params.add("sigma.W",
                     rng.normal_tensor({cfg.dim, cfg.dim}, 1.0 / std::sqrt(double(cfg.dim))));
        m.params.add("sigma.b", Tensor::zeros({1, cfg.dim}));
    }
    if (cfg.combine == CombineRule::ConcatProject) {
        RngStream rng = seed_stream.derive("combine.W");
        m.params.add("combine.W",
                     rng.normal_tensor({2 * cfg.dim, cfg.dim}, 1.0 / std::sqrt(2.0 * cfg.dim)));
    }
    return m;
}

void Model::zero_padding_row() {
    Tensor& M = params.at("item_emb").value;
    for (int64_t j = 0; j < cfg.dim; ++j) M.data[j] = 0.0;
}

Graph::Var GraphBinding::at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw std::out_of_range("parameter not bound: " + name);
    return it->second;
}

GraphBinding bind(Graph& g, const Model& model) {
    GraphBinding bp;
    for (const auto& e : model.params.entries()) bp.vars[e.name] = g.input(e.value);
    return bp;
}

Batch make_batch(std::span<const SequenceExample> examples, const ModelConfig& cfg) {
    Batch b;
    b.size = static_cast<int>(examples.size());
    b.n = cfg.n_max;
    int64_t n = b.n, d = cfg.dim;
    b.item_idx.assign(static_cast<size_t>(b.size * n), 0);
    b.pos_idx.assign(static_cast<size_t>(b.size * n), 0);
    b.row_mask = Tensor::zeros({b.size * n, d});
    for (int64_t e = 0; e < b.size; ++e) {
        const SequenceExample& ex = examples[static_cast<size_t>(e)];
        if (static_cast<int64_t>(ex.items.size()) != n)
            throw DataError("example length " + std::to_string(ex.items.size()) +
                            " does not match n_max " + std::to_string(n));
        for (int64_t k = 0; k < n; ++k) {
            int item = ex.items[static_cast<size_t>(k)];
            if (item < 0 || item > cfg.num_items)
                throw DataError("item id " + std::to_string(item) + " out of range");
            if (item != 0) {
                b.item_idx[static_cast<size_t>(e * n + k)] = item;
                b.pos_idx[static_cast<size_t>(e * n + k)] = n - 1 - k;  // recency index
                for (int64_t j = 0; j < d; ++j) b.row_mask.data[(e * n + k) * d + j] = 1.0;
            }
        }
        b.last_idx.push_back(e * n + (n - 1));
        b.targets.push_back(ex.target);
        b.true_len.push_back(ex.true_length);
    }
    return b;
}

Graph::Var embed_batch(Graph& g, const GraphBinding& bp, const Batch& batch,
                       const ModelConfig& cfg) {
    (void)cfg;
    Graph::Var items = g.gather_rows(bp.at("item_emb"), batch.item_idx);
    Graph::Var pos = g.gather_rows(bp.at("pos_emb"), batch.pos_idx);
    return g.mul_const(g.add(items, pos), batch.row_mask);
}

namespace {

Graph::Var encode_recurrent(Graph& g, const GraphBinding& bp, Graph::Var emb, const Batch& batch,
                            const ModelConfig& cfg, const std::string& prefix) {
    int64_t B = batch.size, n = batch.n, d = cfg.dim;
    Graph::Var Wz = bp.at(prefix + "gru.Wz"), Uz = bp.at(prefix + "gru.Uz"),
               bz = bp.at(prefix + "gru.bz");
    Graph::Var Wr = bp.at(prefix + "gru.Wr"), Ur = bp.at(prefix + "gru.Ur"),
               br = bp.at(prefix + "gru.br");
    Graph::Var Wc = bp.at(prefix + "gru.Wc"), Uc = bp.at(prefix + "gru.Uc"),
               bc = bp.at(prefix + "gru.bc");
    Graph::Var h = g.constant(Tensor::zeros({B, d}));
    for (int64_t k = 0; k < n; ++k) {
        std::vector<int64_t> rows(static_cast<size_t>(B));
        for (int64_t b = 0; b < B; ++b) rows[static_cast<size_t>(b)] = b * n + k;
        Graph::Var x = g.gather_rows(emb, rows);
        Graph::Var z = g.sigmoid(g.add_bias(g.add(g.matmul(x, Wz), g.matmul(h, Uz)), bz));
        Graph::Var r = g.sigmoid(g.add_bias(g.add(g.matmul(x, Wr), g.matmul(h, Ur)), br));
        Graph::Var c = g.tanh_(g.add_bias(g.add(g.matmul(x, Wc), g.matmul(g.mul(r, h), Uc)), bc));
        Graph::Var h_new = g.add(g.mul(z, c), g.mul(g.affine(z, -1.0, 1.0), h));
        // Padding steps keep the previous state.
        Tensor step(Tensor::zeros({B, d})), keep(Tensor::zeros({B, d}));
        for (int64_t b = 0; b < B; ++b) {
            bool real = k >= n - batch.true_len[static_cast<size_t>(b)];
            for (int64_t j = 0; j < d; ++j) {
                step.data[b * d + j] = real ? 1.0 : 0.0;
                keep.data[b * d + j] = real ? 0.0 : 1.0;
            }
        }
        h = g.add(g.mul_const(h_new, step), g.mul_const(h, keep));
    }
    return h;
}

Graph::Var encode_attention(Graph& g, const GraphBinding& bp, Graph::Var emb, const Batch& batch,
                            const ModelConfig& cfg, const std::string& prefix) {
    int64_t B = batch.size, n = batch.n, H = cfg.heads;
    bool causal = cfg.variant == EncoderVariant::SelfAttentionCausal;
    const double ninf = -std::numeric_limits<double>::infinity();
    Tensor mask = Tensor::zeros({B * H * n, n});
    for (int64_t b = 0; b < B; ++b) {
        int64_t first_real = n - batch.true_len[static_cast<size_t>(b)];
        for (int64_t h = 0; h < H; ++h)
            for (int64_t i = 0; i < n; ++i) {
                double* row = &mask.data[((b * H + h) * n + i) * n];
                for (int64_t j = 0; j < n; ++j) {
                    bool ok = i < first_real ? (j == i)  // padding query: self only
                                             : (j >= first_real && (!causal || j <= i));
                    if (!ok) row[j] = ninf;
                }
            }
    }
    Graph::Var x = emb;
    for (int l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + "attn" + std::to_string(l) + ".";
        Graph::Var q = g.matmul(x, bp.at(lp + "Wq"));
        Graph::Var k = g.matmul(x, bp.at(lp + "Wk"));
        Graph::Var v = g.matmul(x, bp.at(lp + "Wv"));
        Graph::Var scores = g.attn_scores(q, k, B, n, H);
        Graph::Var probs = g.softmax_rows(scores, mask);
        Graph::Var att = g.matmul(g.attn_apply(probs, v, B, n, H), bp.at(lp + "Wo"));
        x = g.add(x, att);
        Graph::Var f = g.relu(g.add_bias(g.matmul(x, bp.at(lp + "W1")), bp.at(lp + "b1")));
        f = g.add_bias(g.matmul(f, bp.at(lp + "W2")), bp.at(lp + "b2"));
        x = g.add(x, f);
    }
    return x;
}

}  // namespace

Graph::Var encode_batch(Graph& g, const GraphBinding& bp, Graph::Var emb, const Batch& batch,
                        const ModelConfig& cfg, const std::string& prefix) {
    if (cfg.variant == EncoderVariant::RecurrentGated)
        return encode_recurrent(g, bp, emb, batch, cfg, prefix);
    Graph::Var states = encode_attention(g, bp, emb, batch, cfg, prefix);
    return g.gather_rows(states, batch.last_idx);
}

Graph::Var score_all(Graph& g, const GraphBinding& bp, Graph::Var h) {
    return g.matmul_nt(h, bp.at("item_emb"));
}

Graph::Var bpr_from_representation(Graph& g, const GraphBinding& bp, Graph::Var h,
                                   const std::vector<int>& positives,
                                   const std::vector<int>& negatives) {
    size_t B = positives.size();
    if (B == 0 || negatives.empty() || negatives.size() % B != 0)
        throw std::invalid_argument("bpr_from_representation: bad positive/negative counts");
    size_t n_neg = negatives.size() / B;
    Graph::Var M = bp.at("item_emb");
    std::vector<int64_t> pos_idx(B);
    for (size_t i = 0; i < B; ++i) {
        if (positives[i] == 0) throw std::invalid_argument("padding id as positive item");
        pos_idx[i] = positives[i];
    }
    Graph::Var pos_s = g.row_dot(h, g.gather_rows(M, pos_idx));  // (B,1)
    std::vector<int64_t> neg_idx(negatives.begin(), negatives.end());
    std::vector<int64_t> rep(B * n_neg);  // example row per pair
    for (size_t i = 0; i < B; ++i)
        for (size_t j = 0; j < n_neg; ++j) rep[i * n_neg + j] = static_cast<int64_t>(i);
    Graph::Var h_rep = n_neg == 1 ? h : g.gather_rows(h, rep);
    Graph::Var pos_rep = n_neg == 1 ? pos_s : g.gather_rows(pos_s, rep);
    Graph::Var neg_s = g.row_dot(h_rep, g.gather_rows(M, neg_idx));
    return g.mean(g.softplus(g.sub(neg_s, pos_rep)));
}

double bpr_loss(double score_pos, double score_neg) {
    if (!std::isfinite(score_pos) || !std::isfinite(score_neg))
        throw std::invalid_argument("bpr_loss: non-finite score");
    return softplus(score_neg - score_pos);
}

void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& config_echo) {
    json j;
    j["format_version"] = 1;
    j["model_config"] = {{"variant", to_string(model.cfg.variant)},
                         {"dim", model.cfg.dim},
                         {"n_max", model.cfg.n_max},
                         {"layers", model.cfg.layers},
                         {"heads", model.cfg.heads},
                         {"num_items", model.cfg.num_items},
                         {"stochastic", model.cfg.stochastic},
                         {"confounder", model.cfg.confounder},
                         {"combine", model.cfg.combine == CombineRule::Sum ? "sum" : "concat"}};
    if (!config_echo.empty()) j["config_echo"] = config_echo;
    json params = json::object();
    for (const auto& e : model.params.entries())
        params[e.name] = {{"shape", e.value.shape}, {"data", e.value.data}};
    j["params"] = std::move(params);
    std::ofstream os(path);
    if (!os) throw DataError("cannot write checkpoint " + path);
    os << j.dump() << '\n';
}

Model load_checkpoint(const std::string& path, std::string* config_echo) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read checkpoint " + path);
    json j = json::parse(is);
    if (j.at("format_version").get<int>() != 1)
        throw DataError("unsupported checkpoint version in " + path);
    const json& mc = j.at("model_config");
    ModelConfig cfg;
    cfg.variant = variant_from_name(mc.at("variant").get<std::string>());
    cfg.dim = mc.at("dim").get<int>();
    cfg.n_max = mc.at("n_max").get<int>();
    cfg.layers = mc.at("layers").get<int>();
    cfg.heads = mc.at("heads").get<int>();
    cfg.num_items = mc.at("num_items").get<int>();
    cfg.stochastic = mc.at("stochastic").get<bool>();
    cfg.confounder = mc.at("confounder").get<bool>();
    cfg.combine = mc.at("combine").get<std::string>() == "concat" ? CombineRule::ConcatProject
                                                                  : CombineRule::Sum;
    Model m = Model::init(cfg, RngStream(0));
    for (auto& e : m.params.entries()) {
        const json& p = j.at("params").at(e.name);
        Tensor t(p.at("shape").get<std::vector<int64_t>>(), p.at("data").get<std::vector<double>>());
        if (!t.same_shape(e.value))
            throw DataError("checkpoint shape mismatch for " + e.name);
        e.value = std::move(t);
    }
    if (config_echo && j.contains("config_echo"))
        *config_echo = j.at("config_echo").get<std::string>();
    return m;
}

}  // namespace seqrec

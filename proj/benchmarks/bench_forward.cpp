#include <benchmark/benchmark.h>

#include "seqrec/objective.hpp"

using namespace seqrec;

namespace {

Model make_model(EncoderVariant variant) {
    ModelConfig cfg;
    cfg.variant = variant;
    cfg.dim = 64;
    cfg.n_max = 20;
    cfg.num_items = 1000;
    return Model::init(cfg, RngStream(7));
}

SequenceExample make_example(int n_max) {
    SequenceExample ex;
    ex.user = 1;
    ex.items.assign(static_cast<size_t>(n_max), 0);
    for (int k = 5; k < n_max; ++k) ex.items[static_cast<size_t>(k)] = k * 13 % 999 + 1;
    ex.true_length = n_max - 5;
    ex.target = 42;
    return ex;
}

void bench_encode_score(benchmark::State& state, EncoderVariant variant) {
    Model model = make_model(variant);
    SequenceExample ex = make_example(model.cfg.n_max);
    for (auto _ : state) {
        Scores s = inference_scores(model, ex);
        benchmark::DoNotOptimize(s.values.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(bench_encode_score, recurrent, EncoderVariant::RecurrentGated);
BENCHMARK_CAPTURE(bench_encode_score, causal, EncoderVariant::SelfAttentionCausal);
BENCHMARK_CAPTURE(bench_encode_score, bidirectional, EncoderVariant::SelfAttentionBidirectional);

BENCHMARK_MAIN();

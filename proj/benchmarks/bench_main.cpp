#include "hcmr/datasets.hpp"
#include "hcmr/inference.hpp"
#include "hcmr/training.hpp"

#include <benchmark/benchmark.h>

using namespace hcmr;

namespace {

ModelConfig bench_config(int n_concepts, int n_rules) {
  ModelConfig c;
  c.n_concepts = n_concepts;
  c.n_rules = n_rules;
  c.input_dim = 4;
  c.size_rule_emb = 64;
  c.size_latent = 32;
  c.backbone_hidden = {32};
  return c;
}

void BM_DecodeAdjustSample(benchmark::State& state) {
  const ModelConfig c = bench_config(static_cast<int>(state.range(0)), 4);
  const ModelParameters p = ModelParameters::init(c, 0);
  nn::Rng rng(1);
  reset_role_workload();
  for (auto _ : state) {
    const RoleVars adjusted =
        adjust_role_vars(decode_role_vars(p.memory), p.memory.priorities, nullptr, c.st_temperature);
    benchmark::DoNotOptimize(sample_role_vars(adjusted, rng));
  }
  state.counters["role_slots"] =
      benchmark::Counter(static_cast<double>(role_workload()), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_DecodeAdjustSample)->RangeMultiplier(2)->Range(4, 64);

void BM_TrainingStep(benchmark::State& state) {
  ModelConfig c = bench_config(kXorConcepts, static_cast<int>(state.range(0)));
  ModelParameters p = ModelParameters::init(c, 0);
  SyntheticXorSpec s;
  s.n_examples = 256;
  const Dataset batch = gen_synthetic_xor(s, 0);
  auto named = p.parameters();
  std::vector<ad::Var*> vars;
  for (auto& np : named) vars.push_back(np.var);
  nn::AdamW opt(vars, nn::AdamWOptions{});
  nn::Rng rng(2);
  for (auto _ : state) {
    LikelihoodResult r = training_likelihood(batch, p, nullptr, rng);
    opt.zero_grad();
    ad::backward(r.loss);
    opt.step();
  }
  state.SetItemsProcessed(state.iterations() * batch.size());
}
BENCHMARK(BM_TrainingStep)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_InferMapBatch(benchmark::State& state) {
  const ModelConfig c = bench_config(kXorConcepts, 10);
  const FrozenModel m = freeze(ModelParameters::init(c, 0));
  SyntheticXorSpec s;
  s.n_examples = static_cast<int>(state.range(0));
  const Dataset d = gen_synthetic_xor(s, 0);
  for (auto _ : state) benchmark::DoNotOptimize(infer_map_batch(d.inputs, m));
  state.SetItemsProcessed(state.iterations() * d.size());
}
BENCHMARK(BM_InferMapBatch)->Arg(256)->Arg(4096)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

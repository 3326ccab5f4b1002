#include <benchmark/benchmark.h>

#include <filesystem>
#include <numeric>
#include <random>

#include "vsched/bilevel.hpp"
#include "vsched/convex_inner.hpp"
#include "vsched/ga_scheduler.hpp"
#include "vsched/registry.hpp"
#include "vsched/relaxation.hpp"
#include "vsched/rr_scheduler.hpp"
#include "vsched/scenario.hpp"

using namespace vsched;

namespace {

const Scenario& reference() {
  static const Scenario s = generate_scenario(reference_desk_spec(0));
  return s;
}

const RelaxedInstance& relaxed() {
  static const RelaxedInstance inst = [] {
    RelaxationOptions opts;
    opts.bin_width = 300;
    return build_relaxed_instance(planted_mean_wait_scenario(1, 40), opts);
  }();
  return inst;
}

WeightVector weights() {
  Rng rng(3);
  return sample_weights(nullptr, 1.0, 32, 0.05, rng).weights;
}

void BM_Decode(benchmark::State& state) {
  const Scenario& s = reference();
  Chromosome c;
  c.order.resize(s.size());
  std::iota(c.order.begin(), c.order.end(), 0);
  std::shuffle(c.order.begin(), c.order.end(), std::mt19937_64(1));
  const CostWeights w = CostWeights::preset(CostVariant::v5);
  for (auto _ : state) {
    const Decoded d = decode(c, s);
    benchmark::DoNotOptimize(schedule_cost(d.waits, d.schedule, s, w));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.size()));
}
BENCHMARK(BM_Decode);

void BM_RoundRobin(benchmark::State& state) {
  const Scenario& s = reference();
  for (auto _ : state) benchmark::DoNotOptimize(rr_schedule(s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.size()));
}
BENCHMARK(BM_RoundRobin);

void BM_ObjectiveWithHessian(benchmark::State& state) {
  const RelaxedInstance& inst = relaxed();
  const WeightVector alpha = weights();
  const Eigen::VectorXd z = feasible_start(inst);
  for (auto _ : state) benchmark::DoNotOptimize(objective(z, alpha, inst, true));
}
BENCHMARK(BM_ObjectiveWithHessian);

void BM_SolveInner(benchmark::State& state) {
  const RelaxedInstance& inst = relaxed();
  const WeightVector alpha = weights();
  for (auto _ : state) benchmark::DoNotOptimize(solve_inner(alpha, inst));
}
BENCHMARK(BM_SolveInner)->Unit(benchmark::kMillisecond);

void BM_Embed(benchmark::State& state) {
  const Prompt p = Prompt::from_text("schedule drone pad queue fair robust summary");
  for (auto _ : state) benchmark::DoNotOptimize(embed(p));
}
BENCHMARK(BM_Embed);

void BM_QuerySimilar(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "vsched_bench_registry";
  std::filesystem::remove_all(dir);
  Registry reg(dir);
  std::mt19937_64 gen(5);
  const std::vector<std::string> words{"fast", "route", "queue", "fair", "drone", "pad", "delay", "weather"};
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    Triplet t;
    t.prompt_text = words[gen() % words.size()] + " " + words[gen() % words.size()];
    t.prompt_id = Prompt::from_text(t.prompt_text).id;
    t.timestamp = i;
    t.user_id = "u";
    t.domain = "uav";
    reg.store(t);
  }
  const Embedding q = embed(Prompt::from_text("fast drone"));
  for (auto _ : state) benchmark::DoNotOptimize(reg.query_similar(q, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_QuerySimilar)->Arg(1000)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();

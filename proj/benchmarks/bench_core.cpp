#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "rmtnet/discretize.hpp"
#include "rmtnet/metrics.hpp"
#include "rmtnet/rmtnet_model.hpp"
#include "rmtnet/rng.hpp"
#include "rmtnet/synth.hpp"

using namespace rmt;

namespace {

Dataset make_dataset(std::size_t n) {
  const RawTable raw = make_synthetic_raw(n, 20, 0.5, 1, 0.5);
  const SynthResult synth = generate_synthetic_rejection(raw, 1.0, 2, 32);
  return synth.dataset.assign_splits(3, SplitMode::ApprovalRejection);
}

}  // namespace

static void ForwardPass(benchmark::State& state) {
  const Dataset ds = make_dataset(3000);
  models::ModelConfig cfg;
  cfg.t = static_cast<int>(state.range(0));
  models::RmtNet net(ds.bin_counts(), cfg);
  auto ws = net.make_workspace();
  std::size_t row = 0;
  for (auto _ : state) {
    net.forward(ds.bins(row), ws);
    benchmark::DoNotOptimize(ws.q_t);
    row = (row + 1) % ds.n_rows();
  }
}
BENCHMARK(ForwardPass)->Arg(2)->Arg(3)->Arg(4);

static void LossAndGradEpoch(benchmark::State& state) {
  const Dataset ds = make_dataset(static_cast<std::size_t>(state.range(0)));
  models::ModelConfig cfg;
  models::RmtNet net(ds.bin_counts(), cfg);
  auto ws = net.make_workspace();
  const auto pool = ds.rejection_task_rows();
  std::vector<double> grads(net.params().size());
  for (auto _ : state) {
    std::fill(grads.begin(), grads.end(), 0.0);
    const auto parts = net.loss_and_grad(ds, pool, grads, ws);
    benchmark::DoNotOptimize(parts.total);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(pool.size()));
}
BENCHMARK(LossAndGradEpoch)->Arg(1500)->Arg(6000);

static void AucKs(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  std::vector<double> scores(n), labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::auc(scores, labels));
    benchmark::DoNotOptimize(eval::ks(scores, labels));
  }
}
BENCHMARK(AucKs)->Arg(1000)->Arg(10000)->Arg(100000);

static void DiscretizerFitApply(benchmark::State& state) {
  const RawTable raw =
      make_synthetic_raw(static_cast<std::size_t>(state.range(0)), 20, 0.5,
                         11, 0.5);
  for (auto _ : state) {
    const DiscretizationMap map = fit_discretizer(raw, 32);
    benchmark::DoNotOptimize(apply_discretizer(raw, map));
  }
}
BENCHMARK(DiscretizerFitApply)->Arg(2000)->Arg(20000);

BENCHMARK_MAIN();

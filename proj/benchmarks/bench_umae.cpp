#include <benchmark/benchmark.h>

#include "umae/analysis.hpp"
#include "umae/dataset.hpp"
#include "umae/graph.hpp"
#include "umae/losses.hpp"
#include "umae/masking.hpp"
#include "umae/model.hpp"

using namespace umae;

namespace {

// Toy dataset with images_per_class images per class, n = 8 positions, s = 2.
Dataset toy(int images_per_class) {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.images_per_class = images_per_class;
  spec.n = 8;
  spec.s = 2;
  spec.vocab_size = 12;
  spec.class_signal_positions = {0, 1, 2};
  spec.noise_positions = {3, 4, 5, 6, 7};
  spec.seed = 7;
  return generate_synthetic(spec);
}

MaskFamily family(double rho) {
  MaskFamily f;
  f.n = 8;
  f.rho = rho;
  return f;
}

}  // namespace

static void BM_BuildMaskGraph(benchmark::State& state) {
  const Dataset ds = toy(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_mask_graph(ds, family(0.75)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(ds.size()));
}
BENCHMARK(BM_BuildMaskGraph)->Arg(4)->Arg(16)->Arg(64);

// Dominated by the dense symmetric eigendecomposition of the N1 x N1 matrix.
static void BM_BuildAugGraph(benchmark::State& state) {
  const MaskGraph g = build_mask_graph(toy(static_cast<int>(state.range(0))), family(0.75));
  for (auto _ : state) benchmark::DoNotOptimize(build_aug_graph(g));
  state.counters["nodes"] = g.n1_count();
}
BENCHMARK(BM_BuildAugGraph)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_LossAndGradients(benchmark::State& state) {
  const Dataset ds = toy(8);
  ModelConfig mc;
  mc.n = 8;
  mc.s = 2;
  mc.k = 16;
  mc.arch = Arch::Mlp;
  mc.hidden = 32;
  const EncoderDecoder m = init_model(mc);
  ViewSampler sampler(ds, family(0.75), 1);
  Batch batch;
  for (int b = 0; b < 16; ++b) {
    const auto p = sampler.draw_pair();
    batch.recon.push_back({p.x1, p.x2, 1.0});
  }
  const LossSpec spec{state.range(0) == 0 ? LossKind::Mae : LossKind::UMae, 0.01};
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(m, batch, spec));
}
BENCHMARK(BM_LossAndGradients)->Arg(0)->Arg(1);

static void BM_DistanceSweep(benchmark::State& state) {
  const Dataset ds = toy(16);
  SweepOptions opts;
  opts.rho_grid = {0.25, 0.5, 0.75};
  opts.pairs_budget = 500;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(distance_sweep(ds, opts));
}
BENCHMARK(BM_DistanceSweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

static void BM_EffectiveRank(benchmark::State& state) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Random(state.range(0), 16);
  for (auto _ : state) benchmark::DoNotOptimize(effective_rank(F));
}
BENCHMARK(BM_EffectiveRank)->Arg(128)->Arg(1024);

BENCHMARK_MAIN();

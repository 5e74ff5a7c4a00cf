#include <benchmark/benchmark.h>

#include <vector>

#include "svp/attack.hpp"
#include "svp/evalrobust.hpp"
#include "svp/synthetic.hpp"

namespace svp {
namespace {

const SurrogateModel& model() {
  static const SurrogateModel m(SurrogateWeights::random(2024));
  return m;
}

void BM_SurrogateForward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const Tensor img = synthetic_scene(h, 2 * h, 3);
  for (auto _ : state) benchmark::DoNotOptimize(model().forward(img));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(h * 2 * h));
}
BENCHMARK(BM_SurrogateForward)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_SurrogateBackward(benchmark::State& state) {
  const Tensor base = synthetic_scene(96, 192, 3);
  for (auto _ : state) {
    const auto v = base.data();
    Tensor x = Tensor::from(base.shape(), std::vector<double>(v.begin(), v.end()), true);
    sum(model().forward(x)).backward();
    benchmark::DoNotOptimize(x.grad());
  }
}
BENCHMARK(BM_SurrogateBackward)->Unit(benchmark::kMillisecond);

void BM_MakeMask(benchmark::State& state) {
  const auto family = static_cast<MaskFamily>(state.range(0));
  AttackConfig c;
  c.shape = family;
  const ObjectSample object = synthetic_car(64, 96, 7);
  const auto params = pack(initial_state(c, object).params);
  const Tensor theta = Tensor::from({params.size()}, params, true);
  for (auto _ : state) benchmark::DoNotOptimize(make_mask(family, theta, 64, 96).grid);
  state.SetLabel(to_string(family));
}
BENCHMARK(BM_MakeMask)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

void BM_BuildBatch(benchmark::State& state) {
  const ObjectSample object = synthetic_car(64, 96, 7);
  const auto scenes = synthetic_scenes(4, 96, 192, 11);
  AttackConfig c;
  const AttackState st = initial_state(c, object);
  std::uint64_t s = 0;
  for (auto _ : state) {
    Rng rng(derive_seed(1, s++));
    benchmark::DoNotOptimize(build_batch(object, st.patch, st.mask(), scenes, rng, 2));
  }
}
BENCHMARK(BM_BuildBatch)->Unit(benchmark::kMillisecond);

void BM_AttackStep(benchmark::State& state) {
  const ObjectSample object = synthetic_car(64, 96, 7);
  const auto scenes = synthetic_scenes(4, 96, 192, 11);
  AttackConfig c;
  c.batch = 2;
  c.steps = 1u << 20;
  AttackState st = initial_state(c, object);
  for (auto _ : state) benchmark::DoNotOptimize(run_attack(c, object, scenes, model(), st, st.step + 1));
}
BENCHMARK(BM_AttackStep)->Unit(benchmark::kMillisecond);

void BM_RobustTransform(benchmark::State& state) {
  const auto t = static_cast<RobustTransform>(state.range(0));
  const Tensor img = synthetic_scene(96, 192, 3);
  const double strength = t == RobustTransform::jpeg ? 50 : t == RobustTransform::bit_depth ? 4
                          : t == RobustTransform::median_blur ? 5 : 0.05;
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(apply_robust_transform(img, t, strength, rng));
  state.SetLabel(to_string(t));
}
BENCHMARK(BM_RobustTransform)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace svp

BENCHMARK_MAIN();

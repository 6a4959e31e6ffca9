#include <benchmark/benchmark.h>

#include "polymass/evaluators.hpp"
#include "polymass/metrics.hpp"

using namespace polymass;

namespace {

const MetricField& schwarzschild() {
  static const MetricField g =
      builtin_metric("schwarzschild-isotropic", 3, {{"m", 1.0}}).field();
  return g;
}

const MetricField& ads_uhs() {
  static const MetricField g = to_upper_half_space(
      builtin_metric("ads-schwarzschild-hyperboloid", 3, {{"m", 1.0}}));
  return g;
}

void BM_eval_jet2(benchmark::State& state) {
  const Expr e = Expr::parse("(1 + m/(2*r))^4", 3).bind({{"m", 1.0}});
  const std::array<double, 3> x{4.0, 1.0, -2.0};
  for (auto _ : state) benchmark::DoNotOptimize(e.eval_jet2(x));
}
BENCHMARK(BM_eval_jet2);

void BM_metric_at(benchmark::State& state) {
  const std::array<double, 3> x{4.0, 1.0, -2.0};
  for (auto _ : state) benchmark::DoNotOptimize(schwarzschild().at(x));
}
BENCHMARK(BM_metric_at);

void BM_metric_at_first_order(benchmark::State& state) {
  const std::array<double, 3> x{4.0, 1.0, -2.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(schwarzschild().at_first_order(x));
}
BENCHMARK(BM_metric_at_first_order);

void BM_pullback_at_first_order(benchmark::State& state) {
  const std::array<double, 3> y{0.2, 1.0, -0.5};
  for (auto _ : state) benchmark::DoNotOptimize(ads_uhs().at_first_order(y));
}
BENCHMARK(BM_pullback_at_first_order);

void BM_scalar_curvature(benchmark::State& state) {
  const std::array<double, 3> x{4.0, 1.0, -2.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(scalar_curvature(schwarzschild(), x));
}
BENCHMARK(BM_scalar_curvature);

void BM_face_integral(benchmark::State& state) {
  const Polytope box = Polytope::box(3, 16.0);
  QuadConfig cfg;
  FaceIntegrand mean_curv = [](std::span<const double>, const MetricAt&,
                               const SurfaceGeometry& sg) {
    return sg.mean_curvature;
  };
  for (auto _ : state)
    benchmark::DoNotOptimize(
        integrate_face(schwarzschild(), box.faces()[0], mean_curv, cfg));
}
BENCHMARK(BM_face_integral)->Unit(benchmark::kMillisecond);

void BM_adm_mass(benchmark::State& state) {
  QuadConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(adm_mass(schwarzschild(), 1e3, cfg));
}
BENCHMARK(BM_adm_mass)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "transopt/diagnostics.hpp"
#include "transopt/optim.hpp"
#include "transopt/random.hpp"
#include "transopt/schedule.hpp"

using namespace transopt;

namespace {

ParamVector random_vector(Rng& rng, std::size_t d, double scale) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal(0.0, scale);
  return ParamVector(std::move(v));
}

OptimizerSpec spec_for(int which, StepIndex horizon) {
  TransitionSchedule s;
  s.horizon = horizon;
  s.rho = RhoSchedule::exponential(rho_from_horizon(horizon));
  switch (which) {
    case 0:
      return {StepConfig{0.1}, SgdmSpec{}};
    case 1:
      return {StepConfig{0.001, 1e-8, true}, AdamSpec{}};
    case 2:
      return {StepConfig{0.001}, AmsgradSpec{}};
    case 3:
      return {StepConfig{0.001}, TransitionSpec{BoundFunctionSpec::adabound(0.1, 0.999)}};
    default:
      return {StepConfig{0.001}, DstadamSpec{s}};
  }
}

// One optimizer step on a d-dimensional parameter vector; the state wraps
// around before reaching the DSTAdam horizon.
void BM_Step(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const int which = static_cast<int>(state.range(1));
  constexpr StepIndex horizon = 1 << 20;
  const OptimizerSpec spec = spec_for(which, horizon);
  const FeasibleBox box = FeasibleBox::cube(d, -1.0, 1.0);
  Rng rng(1);
  const ParamVector g = random_vector(rng, d, 0.1);
  ParamVector theta = ParamVector::zeros(d);
  OptimizerState s = OptimizerState::zeros(d, which == 2);
  for (auto _ : state) {
    if (s.t + 1 >= horizon) s = OptimizerState::zeros(d, which == 2);
    theta = apply_step(spec, s, theta, g, box);
    benchmark::DoNotOptimize(theta);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
  state.SetLabel(std::string(method_name(spec.method)));
}
BENCHMARK(BM_Step)->ArgsProduct({{10, 1000, 100000}, {0, 1, 2, 3, 4}});

void BM_EvalBounds(benchmark::State& state) {
  const BoundFunctionSpec specs[] = {BoundFunctionSpec::swats(0.1), BoundFunctionSpec::adabound(0.1, 0.999),
                                     BoundFunctionSpec::adadb(0.1, 1e-3), BoundFunctionSpec::lu(0.1, 0.999, 78200)};
  const BoundFunctionSpec& b = specs[state.range(0)];
  const std::vector<double> abs_m(1, 0.5);
  const MomentStats stats{abs_m, 0.5};
  StepIndex t = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_bounds(b, t, stats));
    t = t % 78200 + 1;
  }
  state.SetLabel(std::string(to_string(b.kind)));
}
BENCHMARK(BM_EvalBounds)->DenseRange(0, 3);

void BM_ProjectBox(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const ParamVector y = random_vector(rng, d, 2.0);
  const ParamVector metric = add(abs(random_vector(rng, d, 1.0)), 0.1);
  const FeasibleBox box = FeasibleBox::cube(d, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(project_box(y, box, metric));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}
BENCHMARK(BM_ProjectBox)->Arg(1000)->Arg(100000);

void BM_LemmaProperty(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> a(static_cast<std::size_t>(state.range(0)));
  for (double& x : a) x = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(lemma_a1_property(a));
}
BENCHMARK(BM_LemmaProperty)->Arg(1000);

}  // namespace

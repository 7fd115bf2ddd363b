#include <numeric>

#include <benchmark/benchmark.h>

#include "transopt/mlp.hpp"
#include "transopt/problems.hpp"

using namespace transopt;

namespace {

void BM_MlpBackward(benchmark::State& state) {
  const Mlp net({2, 16, 16, 2});
  const Dataset data = make_two_cluster(1000, 42);
  std::vector<std::size_t> rows(static_cast<std::size_t>(state.range(0)));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const ParamVector theta = net.init_params(7);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_backward(net, theta, data, rows));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpBackward)->Arg(128)->Arg(1000);

void BM_MlpForward(benchmark::State& state) {
  const Mlp net({2, 16, 16, 2});
  const Dataset data = make_two_cluster(1000, 42);
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const ParamVector theta = net.init_params(7);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(net, theta, data, rows).loss);
}
BENCHMARK(BM_MlpForward);

void BM_LogisticGrad(benchmark::State& state) {
  const auto p = make_logistic(1000, 5, 42, 128, 10000, 10.0);
  const ParamVector theta = ParamVector::zeros(5);
  StepIndex t = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p->grad_at(t, theta));
    t = t % 10000 + 1;
  }
}
BENCHMARK(BM_LogisticGrad);

void BM_QuadraticGrad(benchmark::State& state) {
  const auto p = make_quadratic(static_cast<std::size_t>(state.range(0)), 42, 1000);
  const ParamVector theta = p->initial_point();
  StepIndex t = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p->grad_at(t, theta));
    t = t % 1000 + 1;
  }
}
BENCHMARK(BM_QuadraticGrad)->Arg(10)->Arg(1000);

}  // namespace

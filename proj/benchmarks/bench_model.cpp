#include <benchmark/benchmark.h>

#include "storecycle/calibration.hpp"
#include "storecycle/cashflow.hpp"
#include "storecycle/equilibrium.hpp"

using namespace storecycle;

namespace {

style::Vector vec(std::initializer_list<double> values) {
  style::Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

style::Market two_types() {
  style::ConsumerType a;
  a.a = vec({1.0, 0.5});
  a.b = vec({1.0});
  a.lambda = 1.5;
  a.gamma = 0.8;
  a.share = 0.8;
  style::ConsumerType b;
  b.a = vec({-0.5, 0.2});
  b.b = vec({0.3});
  b.lambda = 1.0;
  b.gamma = 1.2;
  b.share = 0.2;
  return style::Market({a, b}, {vec({0.0, 0.0}), vec({2.0})}, {vec({0.05, -0.02})});
}

cashflow::CashFlowParams store_c() {
  cashflow::CashFlowParams p;
  p.u_eff = 3014.02;
  p.delta = 1.535;
  p.k = 0.0941;
  p.theta = 81.16;
  p.curve = equilibrium::ConversionCurveParams::single(0.0017, 0.0, 57.11e-6);
  return p;
}

void BM_CurveMetrics(benchmark::State& state) {
  const auto p = store_c();
  for (auto _ : state) benchmark::DoNotOptimize(cashflow::curve_metrics(p));
}
BENCHMARK(BM_CurveMetrics)->Unit(benchmark::kMicrosecond);

void BM_SolveEquilibrium(benchmark::State& state) {
  const auto market = two_types();
  equilibrium::InvestmentLevel low;
  low.constraint.budget = 1.0;
  low.threshold = 0.05;
  equilibrium::InvestmentLevel high;
  high.constraint.budget = 2.0;
  high.threshold = 0.08;
  high.weight = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(equilibrium::solve_equilibrium(market, {low, high}));
}
BENCHMARK(BM_SolveEquilibrium)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  const calibration::FixedInputs fixed{1.535, 3000.0, 20.0};
  const calibration::ModelParams truth{0.05, 5e-6, 0.02};
  const int n = static_cast<int>(state.range(0));
  double peak = 0.0;
  for (int t = 1; t <= n; ++t) peak = std::max(peak, calibration::model_value(fixed, truth, t));
  const auto series = calibration::simulate_series(fixed, truth, n, 0.1 * peak, 1);
  for (auto _ : state) benchmark::DoNotOptimize(calibration::fit(series, fixed));
}
BENCHMARK(BM_Fit)->Arg(120)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_NeweyWest(benchmark::State& state) {
  const calibration::FixedInputs fixed{1.535, 3000.0, 20.0};
  const calibration::ModelParams p{0.05, 5e-6, 0.02};
  Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(state.range(0), 1.0, static_cast<double>(state.range(0)));
  const Eigen::MatrixXd J = calibration::jacobian(fixed, p, times);
  const Eigen::VectorXd e = Eigen::VectorXd::Random(times.size());
  for (auto _ : state) benchmark::DoNotOptimize(calibration::newey_west(J, e, 7));
}
BENCHMARK(BM_NeweyWest)->Arg(600)->Arg(10'000)->Unit(benchmark::kMicrosecond);

}  // namespace

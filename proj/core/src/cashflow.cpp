#include "storecycle/cashflow.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "storecycle/errors.hpp"
#include "storecycle/numerics.hpp"
#include "storecycle/spatial.hpp"

namespace storecycle::cashflow {

namespace {

constexpr int kGrid = 10000;
constexpr double kClosingFraction = 0.05;
constexpr double kClosingTol = 1e-4;

/// The curve with the style update policy folded into mu and nu.
ConversionCurveParams effective_curve(const CashFlowParams& params) {
  if (!params.policy) return params.curve;
  const double w = params.policy->omega(params.curve.drift_norm.value_or(0.0));
  ConversionCurveParams out = params.curve;
  for (auto& term : out.terms) {
    term.mu *= w;
    term.nu *= w * w;
  }
  out.drift_norm.reset();
  return out;
}

/// Cash flow per unit of u and theta; metrics are computed on this so that
/// peak and closing times do not depend on either.
double shape(const CashFlowParams& params, const ConversionCurveParams& curve, double t) {
  return spatial::potential_customers_closed_form(1.0, params.delta, params.k, t) *
         equilibrium::conversion_rate(curve, t);
}

}  // namespace

void CashFlowParams::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(u_eff)) throw DomainError("cash flow: u must be positive");
  if (!positive(delta)) throw DomainError("cash flow: delta must be positive");
  if (!positive(k)) throw DomainError("cash flow: k must be positive");
  if (!positive(theta)) throw DomainError("cash flow: theta must be positive");
  curve.validate();
  if (policy) {
    policy->validate();
    if (!curve.drift_norm) throw DomainError("cash flow: a style update policy needs the drift norm");
  }
}

double cash_flow(const CashFlowParams& params, double t) {
  if (!(t > 0.0)) return 0.0;
  return spatial::potential_customers_closed_form(params.u_eff, params.delta, params.k, t) *
         params.theta * equilibrium::conversion_rate(params.curve, t, params.policy);
}

CurveMetrics curve_metrics(const CashFlowParams& params) {
  params.validate();
  const auto curve = effective_curve(params);
  double horizon = equilibrium::curve_horizon(curve);
  if (!std::isfinite(horizon) ||
      std::none_of(curve.terms.begin(), curve.terms.end(), [](const auto& term) {
        return term.nu > 0.0 || term.mu < 0.0;
      }))
    throw NoPeak("curve_metrics: the conversion rate never decays, so the cash flow has no peak");
  // Visibility must also have saturated before the end of the scan.
  horizon = std::max(horizon, 40.0 / (params.delta * params.k));

  auto s = [&](double t) { return shape(params, curve, t); };
  std::vector<double> grid(kGrid + 1);
  std::size_t best = 0;
  int local_maxima = 0;
  for (int i = 0; i <= kGrid; ++i) {
    grid[i] = s(horizon * i / kGrid);
    if (grid[i] > grid[best]) best = i;
  }
  for (int i = 1; i < kGrid; ++i)
    if (grid[i] > grid[i - 1] && grid[i] >= grid[i + 1]) ++local_maxima;
  if (!(grid[best] > 0.0)) throw NoPeak("curve_metrics: the cash flow is zero on the scanned range");

  const double lo = horizon * std::max<double>(0, static_cast<double>(best) - 1) / kGrid;
  const double hi = horizon * std::min<double>(kGrid, static_cast<double>(best) + 1) / kGrid;
  const auto peak = numerics::golden_section_maximize(s, lo, hi, 1e-10 * std::max(1.0, hi));

  CurveMetrics out;
  out.peak_time = peak.x;
  out.peak_value = cash_flow(params, peak.x);
  out.multi_peak = local_maxima > 1;
  const double level = kClosingFraction * peak.value;
  auto below = [&](double t) { return s(t) - level; };

  double closing = std::numeric_limits<double>::quiet_NaN();
  if (!out.multi_peak) {
    for (int i = static_cast<int>(best) + 1; i <= kGrid; ++i) {
      if (grid[i] <= level) {
        const double a = std::max(peak.x, horizon * (i - 1) / kGrid);
        closing = numerics::bisect(below, a, horizon * i / kGrid, kClosingTol);
        break;
      }
    }
  } else {
    for (int i = kGrid; i > static_cast<int>(best); --i) {
      if (grid[i - 1] > level) {
        if (grid[i] > level) break;
        const double a = std::max(peak.x, horizon * (i - 1) / kGrid);
        closing = numerics::bisect(below, a, horizon * i / kGrid, kClosingTol);
        break;
      }
    }
  }
  if (!std::isfinite(closing))
    throw NoPeak("curve_metrics: the cash flow does not fall to 5% of its peak within the horizon");
  out.closing_time = closing;
  out.ramp_up = std::round(out.peak_time);
  out.theoretical_lifespan = closing;
  return out;
}

CashFlowParams with_axis_value(const CashFlowParams& base, SweepAxis axis, double value) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw DomainError("parameter_sweep: values must be positive");
  CashFlowParams p = base;
  switch (axis) {
    case SweepAxis::U:
      p.u_eff = value;
      break;
    case SweepAxis::Nu:
      for (auto& term : p.curve.terms) term.nu = value;
      break;
    case SweepAxis::K:
      p.k = value;
      break;
  }
  return p;
}

std::vector<SweepRow> parameter_sweep(const CashFlowParams& base, SweepAxis axis,
                                      const std::vector<double>& values,
                                      const SweepOptions& options) {
  if (values.empty()) throw DomainError("parameter_sweep: no values");
  if (options.samples < 2) throw DomainError("parameter_sweep: at least two samples per curve");
  std::vector<CashFlowParams> rows_params;
  for (double v : values) rows_params.push_back(with_axis_value(base, axis, v));

  std::vector<std::future<CurveMetrics>> jobs;
  for (const auto& p : rows_params)
    jobs.push_back(std::async(std::launch::async, [&p] { return curve_metrics(p); }));
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) rows.push_back({values[i], jobs[i].get(), {}});

  double t_end = 0.0;
  if (options.t_end) {
    t_end = *options.t_end;
  } else {
    for (const auto& row : rows) t_end = std::max(t_end, 1.25 * row.metrics.closing_time);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int n = 0; n < options.samples; ++n) {
      const double t = t_end * n / (options.samples - 1);
      rows[i].curve.push_back({t, cash_flow(rows_params[i], t)});
    }
  }
  return rows;
}

}  // namespace storecycle::cashflow

#pragma once

#include <optional>
#include <vector>

#include "storecycle/equilibrium.hpp"

namespace storecycle::cashflow {

using equilibrium::ConversionCurveParams;
using equilibrium::StyleUpdatePolicy;

struct CashFlowParams {
  double u_eff = 1.0;  // u or u', people per km^2
  double delta = 1.535;
  double k = 0.01;
  double theta = 1.0;  // average customer price
  ConversionCurveParams curve;
  std::optional<StyleUpdatePolicy> policy;

  void validate() const;
};

struct CurveMetrics {
  double peak_time = 0.0;
  double peak_value = 0.0;
  double closing_time = 0.0;
  double ramp_up = 0.0;
  double theoretical_lifespan = 0.0;
  bool multi_peak = false;
};

/// CF_t = N_t * theta * beta~_t.
double cash_flow(const CashFlowParams& params, double t);

/// Peak, 95%-drop closing point and ramp-up of the curve. Throws NoPeak when
/// the conversion rate never decays.
CurveMetrics curve_metrics(const CashFlowParams& params);

enum class SweepAxis { U, Nu, K };

struct SweepPoint {
  double t;
  double cash_flow;
};

struct SweepRow {
  double value;
  CurveMetrics metrics;
  std::vector<SweepPoint> curve;
};

struct SweepOptions {
  /// Number of curve samples per row on a common grid [0, t_end].
  int samples = 201;
  /// Defaults to 1.25 times the largest closing time of the sweep.
  std::optional<double> t_end;
};

/// Copy of `base` with the swept parameter set to `value`. Sweeping nu sets
/// the decrease coefficient of every consumer type.
CashFlowParams with_axis_value(const CashFlowParams& base, SweepAxis axis, double value);

std::vector<SweepRow> parameter_sweep(const CashFlowParams& base, SweepAxis axis,
                                      const std::vector<double>& values,
                                      const SweepOptions& options = {});

}  // namespace storecycle::cashflow

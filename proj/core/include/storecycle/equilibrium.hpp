#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "storecycle/demand.hpp"
#include "storecycle/style_space.hpp"
#include "storecycle/supply.hpp"

namespace storecycle::equilibrium {

using style::Market;
using style::StyleVector;
using style::Vector;

/// One point of the discretized investment set with its quadrature weight
/// and shutdown threshold r(I).
struct InvestmentLevel {
  supply::InvestmentConstraint constraint;
  double weight = 1.0;
  double threshold = 1.0;
};

/// Equilibrium supply at one investment level, for stores opened at t = 0.
struct InvestmentOutcome {
  double budget;
  double weight;
  double threshold;
  StyleVector style_at_zero;
  double price;
  double lifespan;
};

enum class SolveMethod { Picard, BackwardInduction };

struct EquilibriumSolution {
  std::vector<double> levels;
  std::vector<InvestmentOutcome> investments;
  std::vector<double> residuals;  // |K_j V_j(K) - 1|
  int iterations = 0;
  SolveMethod method = SolveMethod::Picard;

  /// Styles on offer at time t: for every investment level, the stores
  /// opened during [t - T(I), t], parametrized by age.
  demand::StyleSet style_set(const Market& market, double t) const;

  /// Supply decision at t of a store with the given investment index.
  supply::SupplyDecision decision(std::size_t investment, const Market& market, double t) const;

  double max_residual() const;
  nlohmann::json to_json() const;
};

struct EquilibriumOptions {
  double damping = 0.5;
  int max_iter = 500;
  /// Iteration stops once every residual is below this value.
  double tolerance = 1e-10;
  /// Residual bound an accepted solution must satisfy.
  double accept_tolerance = 1e-6;
  int max_backward_sweeps = 100;
  int time_nodes = 128;
  /// Starting levels; defaults to 1 for every type.
  std::vector<double> initial_levels;
  supply::SupplyOptions supply;
};

/// V_j(K) for every type: the weighted sum over investment levels of the
/// score integrated along each store's life. Fills `outcomes` if non-null.
std::vector<double> level_integrals(const Market& market_with_levels,
                                    const std::vector<InvestmentLevel>& investments,
                                    const EquilibriumOptions& options,
                                    std::vector<InvestmentOutcome>* outcomes = nullptr);

/// Levels K with K_j V_j(K) = 1. The levels stored in `market` are ignored.
EquilibriumSolution solve_equilibrium(const Market& market,
                                      const std::vector<InvestmentLevel>& investments,
                                      const EquilibriumOptions& options = {});

/// beta~_t = sum_j P_j beta_j0 exp(mu_j t - nu_j t^2).
struct CurveTerm {
  double share = 1.0;
  double beta0 = 0.01;
  double mu = 0.0;
  double nu = 0.0;
};

struct ConversionCurveParams {
  std::vector<CurveTerm> terms;
  /// |d|, needed only when a style update policy is applied.
  std::optional<double> drift_norm;

  static ConversionCurveParams single(double beta0, double mu, double nu,
                                      std::optional<double> drift_norm = std::nullopt);

  double initial_rate() const;
  void validate() const;
};

/// Curve of the store with investment index `investment`: mu_j and nu_j
/// follow from the equilibrium style, beta_j0 are supplied by the caller.
/// Requires the exponential transform.
ConversionCurveParams conversion_curve(const EquilibriumSolution& solution, const Market& market,
                                       std::size_t investment, const std::vector<double>& beta0);

enum class Efficiency { Linear, Saturating };

/// Post-opening style chasing at speed g_S(S).
struct StyleUpdatePolicy {
  double budget = 0.0;
  Efficiency efficiency = Efficiency::Linear;
  double slope = 1.0;  // Linear: g_S(S) = slope * S
  double cap = 1.0;    // Saturating: g_S(S) = cap * (1 - exp(-rate * S))
  double rate = 1.0;

  double speed() const;
  double speed_at(double budget) const;
  /// omega(S) = max(0, 1 - g_S(S) / |d|).
  double omega(double drift_norm) const;
  void validate() const;
};

double conversion_rate(const ConversionCurveParams& params, double t,
                       const std::optional<StyleUpdatePolicy>& policy = std::nullopt);

/// d beta~_t / dt.
double conversion_rate_derivative(const ConversionCurveParams& params, double t,
                                  const std::optional<StyleUpdatePolicy>& policy = std::nullopt);

enum class PeakShape { Monotone, SinglePeak, MultiPeak };

struct PeakReport {
  PeakShape shape = PeakShape::Monotone;
  std::vector<double> peak_times;
};

/// Time after which every term of the curve has decayed below exp(-40) of its
/// largest value; infinite when no term decays.
double curve_horizon(const ConversionCurveParams& params);

/// Interior maxima of the curve on [0, t_max] located by derivative sign
/// changes on a 10^4-point grid, each polished by bisection. t_max defaults
/// to curve_horizon.
PeakReport single_peak_check(const ConversionCurveParams& params,
                             std::optional<double> t_max = std::nullopt);

}  // namespace storecycle::equilibrium

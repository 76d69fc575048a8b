#include "storecycle/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <string>

#include "storecycle/errors.hpp"
#include "storecycle/numerics.hpp"

namespace storecycle::equilibrium {

namespace {

constexpr double kLifespanTol = 1e-10;
constexpr double kDecayExponent = 40.0;

struct LevelContribution {
  InvestmentOutcome outcome;
  std::vector<double> integrals;
};

LevelContribution contribution(const Market& market, const InvestmentLevel& level,
                               const EquilibriumOptions& options) {
  const auto decision = supply::solve_supply(market, level.constraint, 0.0, options.supply);
  InvestmentOutcome outcome{level.constraint.budget, level.weight, level.threshold,
                            decision.style,          decision.price, 0.0};
  std::vector<double> integrals(market.size(), 0.0);
  try {
    outcome.lifespan = supply::lifespan(decision, market, {level.threshold}, kLifespanTol);
  } catch (const NeverOpens&) {
    return {outcome, integrals};
  }
  if (!std::isfinite(outcome.lifespan))
    throw DomainError("equilibrium: the drift is zero, so store lifespans are unbounded");
  const Vector z = decision.style.joined();
  const Vector& d = market.drift_vector();
  for (std::size_t j = 0; j < market.size(); ++j) {
    integrals[j] = level.weight * numerics::integrate_gauss(
                                      [&](double tau) {
                                        return market.score_joined(j, z - tau * d, decision.price,
                                                                   0.0);
                                      },
                                      0.0, outcome.lifespan, options.time_nodes);
  }
  return {outcome, integrals};
}

std::vector<double> residuals_of(const std::vector<double>& levels, const std::vector<double>& v) {
  std::vector<double> out(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) out[j] = std::abs(levels[j] * v[j] - 1.0);
  return out;
}

double max_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : *std::max_element(xs.begin(), xs.end());
}

bool usable(const std::vector<double>& levels) {
  return std::all_of(levels.begin(), levels.end(),
                     [](double k) { return std::isfinite(k) && k > 0.0 && k < 1e300; });
}

const char* method_name(SolveMethod m) {
  return m == SolveMethod::Picard ? "picard" : "backward_induction";
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

}  // namespace

std::vector<double> level_integrals(const Market& market,
                                    const std::vector<InvestmentLevel>& investments,
                                    const EquilibriumOptions& options,
                                    std::vector<InvestmentOutcome>* outcomes) {
  if (investments.empty()) throw DomainError("equilibrium: the investment set is empty");
  std::vector<std::future<LevelContribution>> jobs;
  jobs.reserve(investments.size());
  for (const auto& level : investments) {
    const auto policy = investments.size() > 1 ? std::launch::async : std::launch::deferred;
    jobs.push_back(std::async(policy, [&market, &level, &options] {
      return contribution(market, level, options);
    }));
  }
  std::vector<double> v(market.size(), 0.0);
  if (outcomes) outcomes->clear();
  for (auto& job : jobs) {
    auto c = job.get();
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += c.integrals[j];
    if (outcomes) outcomes->push_back(std::move(c.outcome));
  }
  return v;
}

EquilibriumSolution solve_equilibrium(const Market& market,
                                      const std::vector<InvestmentLevel>& investments,
                                      const EquilibriumOptions& options) {
  if (investments.empty()) throw DomainError("equilibrium: the investment set is empty");
  for (const auto& level : investments) {
    level.constraint.validate(market.storefront_dim());
    if (!(level.weight > 0.0) || !std::isfinite(level.weight))
      throw DomainError("equilibrium: investment weights must be positive");
    if (!(level.threshold > 0.0) || !std::isfinite(level.threshold))
      throw DomainError("equilibrium: shutdown thresholds must be positive");
  }
  if (market.drift_vector().squaredNorm() == 0.0)
    throw DomainError("equilibrium: the drift is zero, so store lifespans are unbounded");
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw DomainError("equilibrium: damping must lie in (0, 1]");

  const std::size_t m = market.size();
  std::vector<double> levels = options.initial_levels;
  if (levels.empty()) levels.assign(m, 1.0);
  if (levels.size() != m || !usable(levels))
    throw DomainError("equilibrium: initial levels must be positive, one per type");

  auto evaluate = [&](const std::vector<double>& k) {
    return level_integrals(market.with_levels(k), investments, options);
  };

  EquilibriumSolution out;
  std::vector<double> best_levels = levels;
  double best_residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    const auto v = evaluate(levels);
    const double res = max_of(residuals_of(levels, v));
    if (res < best_residual) {
      best_residual = res;
      best_levels = levels;
    }
    if (res <= options.tolerance) break;
    std::vector<double> next(m);
    for (std::size_t j = 0; j < m; ++j) {
      next[j] = v[j] > 0.0 ? (1.0 - options.damping) * levels[j] + options.damping / v[j]
                           : 4.0 * levels[j];
    }
    if (!usable(next)) break;
    levels = std::move(next);
  }
  out.iterations = iter;
  out.method = SolveMethod::Picard;
  levels = best_levels;

  if (best_residual > options.accept_tolerance) {
    // Backward induction: root-solve K_j given the others, from the last type
    // to the first, and sweep until the residuals settle.
    out.method = SolveMethod::BackwardInduction;
    for (int sweep = 0; sweep < options.max_backward_sweeps; ++sweep) {
      for (std::size_t jj = m; jj-- > 0;) {
        auto gap = [&](double log_k) {
          auto trial = levels;
          trial[jj] = std::exp(log_k);
          return trial[jj] * evaluate(trial)[jj] - 1.0;
        };
        double lo = std::log(levels[jj]);
        double hi = lo;
        double g_lo = gap(lo);
        double g_hi = g_lo;
        for (int expand = 0; expand < 200 && g_lo * g_hi > 0.0; ++expand) {
          if (g_lo < 0.0) {
            lo = hi;
            g_lo = g_hi;
            hi += std::ldexp(1.0, expand / 4);
            g_hi = gap(hi);
          } else {
            hi = lo;
            g_hi = g_lo;
            lo -= std::ldexp(1.0, expand / 4);
            g_lo = gap(lo);
          }
        }
        if (g_lo == 0.0) {
          levels[jj] = std::exp(lo);
        } else if (g_lo * g_hi < 0.0) {
          levels[jj] = std::exp(numerics::bisect(gap, lo, hi, 1e-14 * std::max(1.0, std::abs(lo))));
        } else {
          throw FixedPointDivergence("equilibrium: no level of type " + std::to_string(jj) +
                                     " balances its purchase probability");
        }
      }
      ++out.iterations;
      best_residual = max_of(residuals_of(levels, evaluate(levels)));
      if (best_residual <= options.tolerance) break;
    }
  }

  const auto v = level_integrals(market.with_levels(levels), investments, options, &out.investments);
  out.levels = levels;
  out.residuals = residuals_of(levels, v);
  if (out.max_residual() > options.accept_tolerance)
    throw FixedPointDivergence("equilibrium: fixed-point residual " +
                               std::to_string(out.max_residual()) + " after " +
                               std::to_string(out.iterations) +
                               " iterations; parameters are outside the equilibrium regime");
  for (const auto& inv : out.investments)
    if (!(inv.lifespan > 0.0))
      throw FixedPointDivergence("equilibrium: stores with investment " +
                                 std::to_string(inv.budget) + " never open at the fixed point");
  return out;
}

demand::StyleSet EquilibriumSolution::style_set(const Market& market, double t) const {
  const Vector& d = market.drift_vector();
  const double norm = d.norm();
  if (!(norm > 0.0)) throw DomainError("style_set: the drift is zero");
  const auto p = market.product_dim();
  const auto direction = StyleVector::from_joined(d / norm, p);
  std::vector<demand::Segment> segments;
  for (const auto& inv : investments) {
    const double price = inv.price;
    segments.push_back({StyleVector::from_joined(
                            inv.style_at_zero.joined() + (t - inv.lifespan) * d, p),
                        direction, inv.lifespan * norm, [price](double) { return price; },
                        inv.weight / norm});
  }
  return demand::StyleSet::segments(std::move(segments));
}

supply::SupplyDecision EquilibriumSolution::decision(std::size_t investment, const Market& market,
                                                     double t) const {
  const auto& inv = investments.at(investment);
  const Vector z = inv.style_at_zero.joined() + t * market.drift_vector();
  const auto with = market.with_levels(levels);
  return {StyleVector::from_joined(z, market.product_dim()), inv.price,
          supply::cash_flow_density(with, z, inv.price, t)};
}

double EquilibriumSolution::max_residual() const { return max_of(residuals); }

nlohmann::json EquilibriumSolution::to_json() const {
  nlohmann::json inv = nlohmann::json::array();
  for (const auto& o : investments) {
    inv.push_back({{"budget", o.budget},
                   {"weight", o.weight},
                   {"threshold", o.threshold},
                   {"style_at_zero",
                    {{"product", vector_json(o.style_at_zero.product())},
                     {"storefront", vector_json(o.style_at_zero.storefront())}}},
                   {"price", o.price},
                   {"lifespan", o.lifespan}});
  }
  return {{"levels", levels},
          {"investments", inv},
          {"residuals", residuals},
          {"max_residual", max_residual()},
          {"iterations", iterations},
          {"method", method_name(method)}};
}

ConversionCurveParams ConversionCurveParams::single(double beta0, double mu, double nu,
                                                    std::optional<double> drift_norm) {
  ConversionCurveParams p;
  p.terms.push_back({1.0, beta0, mu, nu});
  p.drift_norm = drift_norm;
  p.validate();
  return p;
}

double ConversionCurveParams::initial_rate() const {
  double sum = 0.0;
  for (const auto& term : terms) sum += term.share * term.beta0;
  return sum;
}

void ConversionCurveParams::validate() const {
  if (terms.empty()) throw DomainError("conversion curve: no consumer types");
  double shares = 0.0;
  for (const auto& term : terms) {
    if (!(term.share > 0.0 && term.share <= 1.0))
      throw DomainError("conversion curve: shares must lie in (0, 1]");
    if (!(term.beta0 > 0.0 && term.beta0 < 1.0))
      throw DomainError("conversion curve: beta0 must lie in (0, 1)");
    if (!std::isfinite(term.mu)) throw DomainError("conversion curve: mu must be finite");
    if (!(term.nu >= 0.0) || !std::isfinite(term.nu))
      throw DomainError("conversion curve: nu must be nonnegative");
    shares += term.share;
  }
  if (std::abs(shares - 1.0) > 1e-12) throw DomainError("conversion curve: shares must sum to 1");
  if (drift_norm) {
    if (!(*drift_norm >= 0.0) || !std::isfinite(*drift_norm))
      throw DomainError("conversion curve: drift norm must be nonnegative");
    if (*drift_norm > 0.0)
      for (const auto& term : terms)
        if (!(term.nu > 0.0)) throw DomainError("conversion curve: nu must be positive when |d| > 0");
  }
}

ConversionCurveParams conversion_curve(const EquilibriumSolution& solution, const Market& market,
                                       std::size_t investment, const std::vector<double>& beta0) {
  if (market.transform_spec().kind != style::TransformKind::Exponential)
    throw DomainError("conversion curve: requires the exponential transform");
  if (beta0.size() != market.size())
    throw DomainError("conversion curve: one initial conversion rate per type is required");
  const double kappa = market.transform_spec().kappa;
  const Vector& d = market.drift_vector();
  const Vector z = solution.investments.at(investment).style_at_zero.joined();
  ConversionCurveParams params;
  params.drift_norm = d.norm();
  for (std::size_t j = 0; j < market.size(); ++j) {
    const auto& c = market.consumer(j);
    params.terms.push_back({c.share, beta0[j], kappa * c.lambda * (z - market.ideal_joined(j, 0.0)).dot(d),
                            0.5 * kappa * c.lambda * d.squaredNorm()});
  }
  params.validate();
  return params;
}

double StyleUpdatePolicy::speed_at(double s) const {
  if (efficiency == Efficiency::Linear) return slope * s;
  return cap * (1.0 - std::exp(-rate * s));
}

double StyleUpdatePolicy::speed() const { return speed_at(budget); }

double StyleUpdatePolicy::omega(double drift_norm) const {
  const double g = speed();
  if (!(drift_norm > 0.0)) return g > 0.0 ? 0.0 : 1.0;
  return std::max(0.0, 1.0 - g / drift_norm);
}

void StyleUpdatePolicy::validate() const {
  if (!(budget >= 0.0) || !std::isfinite(budget))
    throw DomainError("style update policy: budget must be nonnegative");
  if (efficiency == Efficiency::Linear) {
    if (!(slope > 0.0) || !std::isfinite(slope))
      throw DomainError("style update policy: slope must be positive");
  } else {
    if (!(cap > 0.0) || !std::isfinite(cap) || !(rate > 0.0) || !std::isfinite(rate))
      throw DomainError("style update policy: cap and rate must be positive");
  }
}

namespace {

double omega_for(const ConversionCurveParams& params,
                 const std::optional<StyleUpdatePolicy>& policy) {
  if (!policy) return 1.0;
  if (!params.drift_norm)
    throw DomainError("conversion rate: a style update policy needs the drift norm");
  return policy->omega(*params.drift_norm);
}

}  // namespace

double conversion_rate(const ConversionCurveParams& params, double t,
                       const std::optional<StyleUpdatePolicy>& policy) {
  const double w = omega_for(params, policy);
  double sum = 0.0;
  for (const auto& term : params.terms)
    sum += term.share * term.beta0 * std::exp(w * term.mu * t - w * w * term.nu * t * t);
  return sum;
}

double conversion_rate_derivative(const ConversionCurveParams& params, double t,
                                  const std::optional<StyleUpdatePolicy>& policy) {
  const double w = omega_for(params, policy);
  double sum = 0.0;
  for (const auto& term : params.terms) {
    const double mu = w * term.mu;
    const double nu = w * w * term.nu;
    sum += term.share * term.beta0 * std::exp(mu * t - nu * t * t) * (mu - 2.0 * nu * t);
  }
  return sum;
}

double curve_horizon(const ConversionCurveParams& params) {
  double horizon = 0.0;
  for (const auto& term : params.terms) {
    if (term.nu > 0.0) {
      const double peak = std::max(0.0, term.mu * term.mu / (4.0 * term.nu));
      const double c = peak - kDecayExponent;
      horizon = std::max(horizon, (term.mu + std::sqrt(term.mu * term.mu - 4.0 * term.nu * c)) /
                                      (2.0 * term.nu));
    } else if (term.mu < 0.0) {
      horizon = std::max(horizon, kDecayExponent / -term.mu);
    } else if (term.mu > 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return horizon;
}

PeakReport single_peak_check(const ConversionCurveParams& params, std::optional<double> t_max) {
  params.validate();
  double end = t_max ? *t_max : curve_horizon(params);
  if (!std::isfinite(end)) {
    // Some term grows forever; scan the span over which the decaying terms act.
    end = 0.0;
    for (const auto& term : params.terms) {
      if (term.nu > 0.0) {
        ConversionCurveParams one;
        one.terms.push_back(term);
        end = std::max(end, curve_horizon(one));
      }
    }
  }
  if (!(end > 0.0)) return {};
  constexpr int kGrid = 10000;
  auto slope = [&](double t) { return conversion_rate_derivative(params, t); };
  PeakReport report;
  double last_positive = -1.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double t = end * i / kGrid;
    const double s = slope(t);
    if (s > 0.0) {
      last_positive = t;
    } else if (s < 0.0 && last_positive >= 0.0) {
      report.peak_times.push_back(numerics::bisect(slope, last_positive, t, 1e-12 * end));
      last_positive = -1.0;
    }
  }
  if (report.peak_times.size() == 1) report.shape = PeakShape::SinglePeak;
  if (report.peak_times.size() > 1) report.shape = PeakShape::MultiPeak;
  return report;
}

}  // namespace storecycle::equilibrium

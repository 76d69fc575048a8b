#include "storecycle/supply.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "storecycle/errors.hpp"
#include "storecycle/numerics.hpp"

namespace storecycle::supply {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
// Changes of the log objective below this relative size are treated as rounding.
constexpr double kFlatTol = 1e-13;

/// Log of the cash flow density and its partial derivatives. Working on the
/// log scale keeps the tolerances independent of the level magnitudes.
class LogObjective {
 public:
  LogObjective(const Market& market, double t) : market_(market), t_(t) {
    for (std::size_t j = 0; j < market.size(); ++j) {
      const auto& c = market.consumer(j);
      log_weight_.push_back(std::log(c.share * c.level));
      ideal_.push_back(market.ideal_joined(j, t));
    }
  }

  /// Fills the per-type log terms and returns log sum_j exp(term_j).
  double log_mass(const Vector& z, double theta, std::vector<double>& terms,
                  std::vector<double>* dlogphi = nullptr) const {
    const std::size_t m = market_.size();
    terms.resize(m);
    if (dlogphi) dlogphi->resize(m);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const auto& c = market_.consumer(j);
      const double u = c.offset_constant() - 0.5 * c.lambda * (z - ideal_[j]).squaredNorm();
      const auto& phi = market_.transform(j);
      terms[j] = log_weight_[j] + phi.log_value(u) - c.gamma * theta;
      if (dlogphi) (*dlogphi)[j] = phi.log_derivative(u);
      peak = std::max(peak, terms[j]);
    }
    double sum = 0.0;
    for (double v : terms) sum += std::exp(v - peak);
    return peak + std::log(sum);
  }

  double value(const Vector& z, double theta) const {
    std::vector<double> terms;
    return std::log(theta) + log_mass(z, theta, terms);
  }

  /// Gradient in z of the log objective at fixed theta.
  double value_and_gradient(const Vector& z, double theta, Vector& grad) const {
    std::vector<double> terms;
    std::vector<double> dlogphi;
    const double lm = log_mass(z, theta, terms, &dlogphi);
    grad = Vector::Zero(z.size());
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const double pi = std::exp(terms[j] - lm);
      grad -= pi * dlogphi[j] * market_.consumer(j).lambda * (z - ideal_[j]);
    }
    return std::log(theta) + lm;
  }

  /// d/dtheta of the log objective at fixed z.
  double price_derivative(const Vector& z, double theta) const {
    std::vector<double> terms;
    const double lm = log_mass(z, theta, terms);
    double mean_gamma = 0.0;
    for (std::size_t j = 0; j < terms.size(); ++j)
      mean_gamma += std::exp(terms[j] - lm) * market_.consumer(j).gamma;
    return 1.0 / theta - mean_gamma;
  }

  const std::vector<Vector>& ideals() const { return ideal_; }

 private:
  const Market& market_;
  double t_;
  std::vector<double> log_weight_;
  std::vector<Vector> ideal_;
};

/// Projected gradient ascent with backtracking on the style block.
Vector maximize_style(const LogObjective& obj, const InvestmentConstraint& constraint,
                      Eigen::Index product_dim, Vector z, double theta,
                      const SupplyOptions& options) {
  z = constraint.project_joined(z, product_dim);
  Vector grad;
  double f = obj.value_and_gradient(z, theta, grad);
  double step = 1.0;
  for (int iter = 0; iter < options.max_inner_iter; ++iter) {
    const Vector mapped = constraint.project_joined(z + grad, product_dim);
    if ((mapped - z).norm() <= options.grad_tol) return z;
    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving) {
      Vector trial = constraint.project_joined(z + step * grad, product_dim);
      // Re-projecting a boundary point wobbles at rounding level; keep it put.
      const auto q = trial.size() - product_dim;
      if ((trial.tail(q) - z.tail(q)).norm() <= 64.0 * kEps * (1.0 + z.tail(q).norm()))
        trial.tail(q) = z.tail(q);
      const Vector move = trial - z;
      if (move.norm() == 0.0) return z;
      Vector trial_grad;
      const double ft = obj.value_and_gradient(trial, theta, trial_grad);
      const double noise = kFlatTol * (1.0 + std::abs(f));
      const double slope = grad.dot(move);
      // Below the resolution of f, accept a step unless it overshoots the
      // one-dimensional maximum along the move.
      const bool improves = ft - f > noise && ft >= f + 1e-4 * slope;
      const bool flat_ok = std::abs(ft - f) <= noise && trial_grad.dot(move) >= -0.5 * slope;
      if (improves || flat_ok) {
        z = trial;
        f = ft;
        grad = trial_grad;
        accepted = true;
        step = std::min(step * 2.0, 1e8);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return z;  // no ascent direction left at working precision
  }
  throw NonConvergence("supply: projected gradient did not converge within " +
                       std::to_string(options.max_inner_iter) + " iterations");
}

/// Best price for a fixed style: golden section over the search interval,
/// then bisection on the derivative around the golden-section estimate.
double maximize_price(const LogObjective& obj, const Vector& z, const SupplyOptions& options) {
  auto f = [&](double theta) { return obj.value(z, theta); };
  const double span = options.theta_hi - options.theta_lo;
  const auto coarse =
      numerics::golden_section_maximize(f, options.theta_lo, options.theta_hi, 1e-7 * span);
  const double h = 1e-5 * span;
  const double lo = std::max(options.theta_lo, coarse.x - h);
  const double hi = std::min(options.theta_hi, coarse.x + h);
  auto df = [&](double theta) { return obj.price_derivative(z, theta); };
  if (df(lo) > 0.0 && df(hi) < 0.0) return numerics::bisect(df, lo, hi, 4.0 * kEps * hi);
  return coarse.x;
}

Candidate local_optimum(const LogObjective& obj, const Market& market,
                        const InvestmentConstraint& constraint, Vector z, double t,
                        const SupplyOptions& options) {
  const auto p = market.product_dim();
  z = constraint.project_joined(z, p);
  double theta = maximize_price(obj, z, options);
  for (int outer = 0; outer < options.max_outer_iter; ++outer) {
    const Vector z_next = maximize_style(obj, constraint, p, z, theta, options);
    const double theta_next = maximize_price(obj, z_next, options);
    const bool settled = (z_next - z).norm() <= 1e-12 * (1.0 + z.norm()) &&
                         std::abs(theta_next - theta) <= 1e-12 * theta;
    z = z_next;
    theta = theta_next;
    if (settled) break;
  }
  return {z, theta, cash_flow_density(market, z, theta, t)};
}

bool same_style(const Candidate& a, const Candidate& b) {
  const double scale = 1.0 + std::max(a.z.norm(), b.z.norm());
  return (a.z - b.z).norm() <= 1e-6 * scale && std::abs(a.price - b.price) <= 1e-6 * a.price;
}

}  // namespace

double InvestmentConstraint::cost(const Vector& storefront) const {
  if (kind == CostKind::QuadraticNorm) return storefront.squaredNorm();
  return (weights.array() * storefront.array().square()).sum();
}

Vector InvestmentConstraint::project(const Vector& y) const {
  if (cost(y) <= budget) return y;
  if (kind == CostKind::QuadraticNorm) return y * std::sqrt(budget / y.squaredNorm());
  // xi_i = y_i / (1 + mu w_i) with g(xi(mu)) = I; g(xi(mu)) decreases in mu.
  auto excess = [&](double mu) {
    const Eigen::ArrayXd xi = y.array() / (1.0 + mu * weights.array());
    return (weights.array() * xi.square()).sum() - budget;
  };
  double hi = 1.0;
  while (excess(hi) > 0.0) hi *= 2.0;
  const double mu = numerics::bisect(excess, 0.0, hi, 0.0, 2000);
  return (y.array() / (1.0 + mu * weights.array())).matrix();
}

Vector InvestmentConstraint::project_joined(const Vector& z, Eigen::Index product_dim) const {
  Vector out = z;
  out.tail(z.size() - product_dim) = project(z.tail(z.size() - product_dim));
  return out;
}

void InvestmentConstraint::validate(Eigen::Index storefront_dim) const {
  if (!(budget > 0.0) || !std::isfinite(budget))
    throw DomainError("investment constraint: budget must be positive");
  if (kind == CostKind::WeightedQuadratic) {
    if (weights.size() != storefront_dim)
      throw DomainError("investment constraint: weight count must equal q");
    if (!(weights.array() > 0.0).all() || !weights.allFinite())
      throw DomainError("investment constraint: weights must be positive");
  }
}

void InvestmentConstraint::check_tight(const Market& market) const {
  validate(market.storefront_dim());
  for (std::size_t j = 0; j < market.size(); ++j) {
    if (!(cost(market.ideal(j, 0.0).storefront()) > budget))
      throw DomainError("investment constraint with budget " + std::to_string(budget) +
                        " is not tight for consumer type " + std::to_string(j));
  }
}

double cash_flow_density(const Market& market, const Vector& z, double price, double t) {
  double sum = 0.0;
  for (std::size_t j = 0; j < market.size(); ++j) {
    const auto& c = market.consumer(j);
    sum += c.share * c.level * market.score_joined(j, z, price, t);
  }
  return price * sum;
}

double cash_flow_density(const SupplyDecision& decision, const Market& market, double t) {
  return cash_flow_density(market, decision.style.joined(), decision.price, t);
}

std::size_t select_by_ordering_rule(std::span<const Candidate> candidates, const Market& market,
                                    double t, double tie_rel_tol) {
  if (candidates.empty()) throw DomainError("ordering rule: no candidates");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::max(best, c.objective);
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].objective >= best * (1.0 - tie_rel_tol)) survivors.push_back(i);

  for (std::size_t j = 0; j < market.size() && survivors.size() > 1; ++j) {
    const auto& type = market.consumer(j);
    std::vector<double> mass(candidates.size());
    double top = -std::numeric_limits<double>::infinity();
    for (auto i : survivors) {
      mass[i] = type.share * type.level *
                market.score_joined(j, candidates[i].z, candidates[i].price, t);
      top = std::max(top, mass[i]);
    }
    std::erase_if(survivors, [&](std::size_t i) { return mass[i] < top * (1.0 - tie_rel_tol); });
  }

  for (auto i : survivors) {
    if (!same_style(candidates[i], candidates[survivors.front()]))
      throw DominanceViolation(
          "supply: " + std::to_string(survivors.size()) +
          " distinct optima survive the probability-ordering rule; the population is outside "
          "the dominant-consumer regime");
  }
  // All survivors are the same optimum; pick one independently of input order.
  return *std::max_element(survivors.begin(), survivors.end(), [&](std::size_t l, std::size_t r) {
    const auto& a = candidates[l];
    const auto& b = candidates[r];
    if (a.objective != b.objective) return a.objective < b.objective;
    return std::lexicographical_compare(b.z.begin(), b.z.end(), a.z.begin(), a.z.end());
  });
}

SupplyDecision solve_supply(const Market& market, const InvestmentConstraint& constraint, double t,
                            const SupplyOptions& options) {
  if (!std::isfinite(t)) throw DomainError("solve_supply: time must be finite");
  if (!(options.theta_lo > 0.0 && options.theta_hi > options.theta_lo))
    throw DomainError("solve_supply: invalid price search interval");
  constraint.validate(market.storefront_dim());

  const LogObjective obj(market, t);
  std::vector<Vector> starts = obj.ideals();

  // Restarts: random mixtures of the ideal styles, jittered by their spread.
  Vector centre = Vector::Zero(market.dim());
  for (const auto& z : starts) centre += z / static_cast<double>(starts.size());
  double spread = 1.0;
  for (const auto& z : starts) spread = std::max(spread, (z - centre).norm());
  for (int r = 0; r < options.restarts; ++r) {
    std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r + 1));
    std::exponential_distribution<double> expo(1.0);
    std::normal_distribution<double> normal(0.0, 0.25 * spread);
    Vector z = Vector::Zero(market.dim());
    double total = 0.0;
    for (const auto& ideal : obj.ideals()) {
      const double w = expo(rng);
      z += w * ideal;
      total += w;
    }
    z /= total;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += normal(rng);
    starts.push_back(z);
  }

  std::vector<Candidate> candidates;
  for (const auto& start : starts)
    candidates.push_back(local_optimum(obj, market, constraint, start, t, options));

  const std::size_t pick = select_by_ordering_rule(candidates, market, t, options.tie_rel_tol);
  const auto& best = candidates[pick];
  if (!(best.objective > 0.0) || !std::isfinite(best.objective))
    throw NonConvergence("supply: optimizer returned a non-positive cash flow density");
  return {StyleVector::from_joined(best.z, market.product_dim()), best.price, best.objective};
}

double lifespan(const SupplyDecision& decision, const Market& market, const ShutdownRule& rule,
                double tol) {
  if (!(rule.threshold > 0.0)) throw DomainError("lifespan: threshold must be positive");
  auto density = [&](double tau) { return cash_flow_density(decision, market, tau); };
  const double at_open = density(0.0);
  if (at_open < rule.threshold)
    throw NeverOpens("lifespan: cash flow density at opening (" + std::to_string(at_open) +
                     ") is below the shutdown threshold");
  const Vector& d = market.drift_vector();
  const double d2 = d.squaredNorm();
  if (d2 == 0.0) return std::numeric_limits<double>::infinity();

  // Past the last per-type vertex every term decays, so the density is
  // strictly decreasing there.
  const Vector z = decision.style.joined();
  double vertex = 0.0;
  for (std::size_t j = 0; j < market.size(); ++j)
    vertex = std::max(vertex, (z - market.ideal_joined(j, 0.0)).dot(d) / d2);

  auto excess = [&](double tau) { return density(tau) - rule.threshold; };
  if (excess(vertex) >= 0.0) {
    double width = std::max(1.0, vertex);
    double hi = vertex + width;
    for (int i = 0; excess(hi) >= 0.0; ++i) {
      if (i > 200) throw NonConvergence("lifespan: density never drops below the threshold");
      width *= 2.0;
      hi = vertex + width;
    }
    return numerics::bisect(excess, vertex, hi, tol);
  }
  // The last crossing lies before the vertex; scan back from it.
  constexpr int kGrid = 4096;
  for (int i = kGrid - 1; i >= 0; --i) {
    const double lo = vertex * i / kGrid;
    if (excess(lo) >= 0.0) return numerics::bisect(excess, lo, vertex * (i + 1) / kGrid, tol);
  }
  return 0.0;
}

}  // namespace storecycle::supply

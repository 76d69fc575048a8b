#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "storecycle/style_space.hpp"

namespace storecycle::supply {

using style::Market;
using style::StyleVector;
using style::Vector;

enum class CostKind { QuadraticNorm, WeightedQuadratic };

/// g_I(xi) <= I on the storefront block; the product block is unconstrained.
struct InvestmentConstraint {
  double budget = 1.0;
  CostKind kind = CostKind::QuadraticNorm;
  Vector weights;  // WeightedQuadratic only, all positive

  double cost(const Vector& storefront) const;
  /// Euclidean projection of a storefront block onto {g_I <= I}.
  Vector project(const Vector& storefront) const;
  /// Projection of a joined style onto {G_I <= I}.
  Vector project_joined(const Vector& z, Eigen::Index product_dim) const;

  void validate(Eigen::Index storefront_dim) const;
  /// Throws DomainError unless g_I(xi_hat_j) > I for every consumer type.
  void check_tight(const Market& market) const;
};

struct SupplyDecision {
  StyleVector style;
  double price;
  double objective;  // cash flow density at the optimum
};

struct ShutdownRule {
  double threshold;
};

struct SupplyOptions {
  double theta_lo = 1e-3;
  double theta_hi = 50.0;
  int restarts = 8;
  std::uint64_t seed = 0x5eed5eedULL;
  double grad_tol = 1e-10;
  int max_inner_iter = 20000;
  int max_outer_iter = 200;
  double tie_rel_tol = 1e-9;
};

/// A local optimum of the supply problem.
struct Candidate {
  Vector z;
  double price;
  double objective;
};

/// theta * sum_j P_j K_j F_jt(z, theta), on a joined style.
double cash_flow_density(const Market& market, const Vector& z, double price, double t);

/// Index of the candidate picked by the probability-ordering rule: among the
/// candidates whose objective is within tie_rel_tol of the best, keep the
/// maximizers of P_1 rho_1, then of P_2 rho_2, and so on. Throws
/// DominanceViolation if distinct styles survive the whole chain.
std::size_t select_by_ordering_rule(std::span<const Candidate> candidates, const Market& market,
                                    double t, double tie_rel_tol = 1e-9);

/// Optimal style and price for a store opening at time t.
SupplyDecision solve_supply(const Market& market, const InvestmentConstraint& constraint, double t,
                            const SupplyOptions& options = {});

/// Cash flow density of a fixed decision evaluated at time t.
double cash_flow_density(const SupplyDecision& decision, const Market& market, double t);

/// Largest tau with cash_flow_density(decision, tau) >= r for a store
/// opened at time 0, to absolute tolerance tol. Returns +infinity when the
/// drift is zero.
double lifespan(const SupplyDecision& decision_at_0, const Market& market, const ShutdownRule& rule,
                double tol = 1e-6);

}  // namespace storecycle::supply

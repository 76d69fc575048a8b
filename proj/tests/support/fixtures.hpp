#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <vector>

#include "storecycle/equilibrium.hpp"
#include "storecycle/style_space.hpp"
#include "storecycle/supply.hpp"

namespace storecycle::testing {

inline style::Vector vec(std::initializer_list<double> values) {
  style::Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

/// One type, one product and one storefront attribute, exponential transform.
struct SingleTypeScenario {
  double lambda = 1.5;
  double gamma = 0.8;
  double a = 1.0;
  double b = 1.0;
  double x_bar0 = 0.0;
  double xi_bar0 = 2.0;
  double c = 0.05;
  double budget = 1.0;
  double threshold = 0.05;

  style::Market market() const {
    style::ConsumerType t;
    t.a = vec({a});
    t.b = vec({b});
    t.lambda = lambda;
    t.gamma = gamma;
    t.share = 1.0;
    return style::Market({t}, {vec({x_bar0}), vec({xi_bar0})}, {vec({c})});
  }

  equilibrium::InvestmentLevel level() const {
    equilibrium::InvestmentLevel l;
    l.constraint.budget = budget;
    l.threshold = threshold;
    return l;
  }

  /// K with K * integral_0^T F_0(z* - tau d, 1/gamma) dtau = 1, where the
  /// optimum sits on the storefront boundary xi = sqrt(I) and the lifespan
  /// solves theta K F(tau) = r. Solved by log-scale bisection on K.
  double analytic_level() const {
    const double theta = 1.0 / gamma;
    const double offset = (a * a + b * b) / (2.0 * lambda);
    const double xi_hat = b / lambda + xi_bar0;
    const double gap = xi_hat - std::sqrt(budget);
    const double peak = std::exp(offset - 0.5 * lambda * gap * gap - gamma * theta);
    const double nu = 0.5 * lambda * c * c;
    auto excess = [&](double k) {
      const double span = std::sqrt(std::log(theta * k * peak / threshold) / nu);
      return k * peak * std::sqrt(std::numbers::pi) / (2.0 * std::sqrt(nu)) *
                 std::erf(std::sqrt(nu) * span) -
             1.0;
    };
    double lo = threshold / (theta * peak) * (1.0 + 1e-12);
    double hi = 1e8;
    for (int i = 0; i < 400; ++i) {
      const double mid = std::sqrt(lo * hi);
      (excess(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

/// Two types with a two-dimensional product block, in the dominance regime.
inline style::Market two_type_market() {
  style::ConsumerType t1;
  t1.a = vec({1.0, 0.5});
  t1.b = vec({1.0});
  t1.lambda = 1.5;
  t1.gamma = 0.8;
  t1.share = 0.8;
  style::ConsumerType t2;
  t2.a = vec({-0.5, 0.2});
  t2.b = vec({0.3});
  t2.lambda = 1.0;
  t2.gamma = 1.2;
  t2.share = 0.2;
  return style::Market({t1, t2}, {vec({0.0, 0.0}), vec({2.0})}, {vec({0.05, -0.02})});
}

inline std::vector<equilibrium::InvestmentLevel> two_type_investments() {
  equilibrium::InvestmentLevel l1;
  l1.constraint.budget = 1.0;
  l1.threshold = 0.05;
  equilibrium::InvestmentLevel l2;
  l2.constraint.budget = 2.0;
  l2.threshold = 0.08;
  l2.weight = 0.5;
  return {l1, l2};
}

/// Two types preferring 3g and 1g of salt, a storefront ideal of 5 and a
/// cost 5 xi^2 <= 20 capping the storefront at 2.
inline style::Market salt_market(double level_ratio) {
  style::ConsumerType high;
  high.a = vec({2.0});
  high.b = vec({0.0});
  high.lambda = 2.0;
  high.gamma = 1.0;
  high.share = 1.0 / 3.0;
  high.level = level_ratio;
  style::ConsumerType low = high;
  low.a = vec({-2.0});
  low.share = 2.0 / 3.0;
  low.level = 1.0;
  return style::Market({high, low}, {vec({2.0}), vec({5.0})}, {vec({0.0})});
}

inline supply::InvestmentConstraint salt_constraint() {
  supply::InvestmentConstraint c;
  c.budget = 20.0;
  c.kind = supply::CostKind::WeightedQuadratic;
  c.weights = vec({5.0});
  return c;
}

/// Fitted parameters of the three reference stores (raw scale).
struct StoreFit {
  const char* name;
  double u_prime;
  double theta;
  double k;
  double nu;
  double beta0;
  double lifespan;
};

inline constexpr std::array<StoreFit, 3> kReferenceStores{{
    {"A", 3470.17, 19.24, 2.50e-2, 2.88e-6, 3.59e-2, 1043.0},
    {"B", 692.41, 17.49, 24.65e-2, 0.83e-6, 3.46e-2, 1896.0},
    {"C", 3014.02, 81.16, 9.41e-2, 57.11e-6, 0.17e-2, 233.0},
}};

}  // namespace storecycle::testing

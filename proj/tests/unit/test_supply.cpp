#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "storecycle/errors.hpp"
#include "storecycle/supply.hpp"

using namespace storecycle;
using namespace storecycle::supply;
using storecycle::testing::vec;
namespace st = storecycle::testing;

namespace {

InvestmentConstraint budget(double b) {
  InvestmentConstraint c;
  c.budget = b;
  return c;
}

struct GridOptimum {
  double x = 0.0;
  double xi = 0.0;
  double theta = 0.0;
  double value = -1.0;
};

/// Exhaustive search over a 200 x 200 grid of feasible (x, xi) with a
/// 200-point price grid, for p = q = 1.
GridOptimum grid_search(const Market& m, const InvestmentConstraint& c, double t, double x_lo,
                        double x_hi, double theta_lo, double theta_hi) {
  const double xi_max = std::sqrt(c.budget / (c.kind == CostKind::QuadraticNorm ? 1.0 : c.weights[0]));
  GridOptimum best;
  constexpr int n = 200;
  for (int i = 0; i < n; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / (n - 1);
    for (int k = 0; k < n; ++k) {
      const double xi = -xi_max + 2.0 * xi_max * k / (n - 1);
      const Vector z = vec({x, xi});
      for (int l = 0; l < n; ++l) {
        const double theta = theta_lo + (theta_hi - theta_lo) * l / (n - 1);
        const double v = cash_flow_density(m, z, theta, t);
        if (v > best.value) best = {x, xi, theta, v};
      }
    }
  }
  return best;
}

/// Root of (y - 1) e^{-(y-1)^2} + (y + 1) e^{-(y+1)^2} = 0 with y in (0.5, 1.5):
/// the stationary points 2 +- y of the equal-weight two-bump salt objective.
double symmetric_salt_offset() {
  auto g = [](double y) {
    return (y - 1.0) * std::exp(-(y - 1.0) * (y - 1.0)) + (y + 1.0) * std::exp(-(y + 1.0) * (y + 1.0));
  };
  double lo = 0.5, hi = 1.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Market random_dominant_market(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  style::ConsumerType first;
  first.a = vec({-1.0 + 2.0 * u(rng)});
  first.b = vec({0.5 + u(rng)});
  first.lambda = 1.0 + u(rng);
  first.gamma = 0.5 + u(rng);
  first.share = 0.5 + 0.3 * u(rng);
  first.level = 2.0 + 2.0 * u(rng);
  style::ConsumerType second = first;
  second.a = vec({-1.0 + 2.0 * u(rng)});
  second.b = vec({0.2 + u(rng)});
  second.lambda = 1.0 + u(rng);
  second.gamma = 0.5 + u(rng);
  second.share = 1.0 - first.share;
  second.level = 0.2 + 0.5 * u(rng);
  return Market({first, second}, {vec({0.0}), vec({2.0 + u(rng)})}, {vec({0.05})});
}

}  // namespace

TEST(InvestmentConstraint, CostsAndProjections) {
  const auto c = budget(4.0);
  EXPECT_DOUBLE_EQ(c.cost(vec({1.0, 2.0})), 5.0);
  EXPECT_EQ(c.project(vec({1.0, 1.0})), vec({1.0, 1.0}));
  const Vector p = c.project(vec({3.0, 4.0}));
  EXPECT_NEAR(p[0], 1.2, 1e-15);
  EXPECT_NEAR(p[1], 1.6, 1e-15);

  InvestmentConstraint w;
  w.budget = 2.0;
  w.kind = CostKind::WeightedQuadratic;
  w.weights = vec({1.0, 4.0});
  const Vector y = vec({3.0, 2.0});
  const Vector q = w.project(y);
  EXPECT_NEAR(w.cost(q), 2.0, 1e-12);
  // KKT: y - q is parallel to the cost gradient 2 W q.
  const Vector grad = 2.0 * (w.weights.array() * q.array()).matrix();
  const Vector gap = y - q;
  EXPECT_NEAR(gap[0] * grad[1] - gap[1] * grad[0], 0.0, 1e-10);
  EXPECT_GT(gap.dot(grad), 0.0);
}

TEST(InvestmentConstraint, ProjectionLeavesTheProductBlockAlone) {
  const auto c = budget(1.0);
  const Vector z = c.project_joined(vec({7.0, -3.0, 2.0, 2.0}), 2);
  EXPECT_EQ(z.head(2), vec({7.0, -3.0}));
  EXPECT_NEAR(z.tail(2).norm(), 1.0, 1e-15);
}

TEST(InvestmentConstraint, ValidationAndTightness) {
  EXPECT_THROW(budget(0.0).validate(1), DomainError);
  InvestmentConstraint w;
  w.kind = CostKind::WeightedQuadratic;
  w.weights = vec({1.0, -1.0});
  EXPECT_THROW(w.validate(2), DomainError);
  EXPECT_THROW(w.validate(3), DomainError);
  const auto market = st::SingleTypeScenario{}.market();
  EXPECT_NO_THROW(budget(1.0).check_tight(market));
  EXPECT_THROW(budget(100.0).check_tight(market), DomainError);
}

TEST(SolveSupply, SingleTypePriceIsInverseGamma) {
  for (double gamma : {0.3, 0.8, 2.0, 7.0}) {
    st::SingleTypeScenario s;
    s.gamma = gamma;
    const auto d = solve_supply(s.market(), budget(s.budget), 0.0);
    EXPECT_NEAR(d.price, 1.0 / gamma, 1e-9 / gamma);
  }
}

TEST(SolveSupply, SingleTypeStyleIsTheProjectedIdeal) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    style::ConsumerType c;
    c.a = vec({g(rng), g(rng)});
    c.b = vec({1.0 + std::abs(g(rng)), 1.0 + std::abs(g(rng))});
    c.lambda = 1.0 + std::abs(g(rng));
    c.gamma = 0.5 + std::abs(g(rng));
    const Market m({c}, {vec({g(rng), g(rng)}), vec({1.0, 1.0})}, {vec({0.01, 0.02})});
    const double t = 10.0 * std::abs(g(rng));
    const auto d = solve_supply(m, budget(1.0), t);
    const auto ideal = m.ideal(0, t);
    EXPECT_LT((d.style.product() - ideal.product()).norm(), 1e-8);
    const Vector expected = ideal.storefront() / ideal.storefront().norm();
    EXPECT_LT((d.style.storefront() - expected).norm(), 1e-8);
    EXPECT_NEAR(d.price, 1.0 / c.gamma, 1e-9);
  }
}

TEST(SolveSupply, SingleTypeAgreesWithGridSearch) {
  const st::SingleTypeScenario s;
  const auto m = s.market();
  const auto c = budget(s.budget);
  const auto d = solve_supply(m, c, 3.0);
  const auto grid = grid_search(m, c, 3.0, -1.0, 2.0, 0.1, 3.0);
  EXPECT_LE(grid.value, d.objective * (1.0 + 1e-12));
  EXPECT_NEAR(grid.x, d.style.product()[0], 3.0 / 199);
  EXPECT_NEAR(grid.xi, d.style.storefront()[0], 2.0 / 199);
  EXPECT_NEAR(grid.theta, d.price, 2.9 / 199);
}

TEST(SolveSupply, UniqueOptimumUnderDominance) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 6; ++rep) {
    const auto m = random_dominant_market(rng);
    const auto c = budget(1.0);
    const auto d = solve_supply(m, c, 0.0);
    const auto grid = grid_search(m, c, 0.0, -2.0, 2.0, 0.1, 3.0);
    EXPECT_LE(grid.value, d.objective * (1.0 + 1e-12));
    EXPECT_GE(grid.value, d.objective * (1.0 - 1e-3));
    EXPECT_NEAR(grid.x, d.style.product()[0], 2.0 * 4.0 / 199);
    EXPECT_NEAR(grid.xi, d.style.storefront()[0], 2.0 * 2.0 / 199);
    EXPECT_NEAR(grid.theta, d.price, 2.0 * 2.9 / 199);
  }
}

TEST(SolveSupply, StorefrontConstraintIsActive) {
  const auto m = st::two_type_market();
  for (double b : {0.5, 1.0, 2.0})
    for (double t : {0.0, 5.0, 30.0}) {
      const auto c = budget(b);
      const auto d = solve_supply(m, c, t);
      EXPECT_NEAR(c.cost(d.style.storefront()), b, 1e-8);
      EXPECT_GT(d.price, 0.0);
    }
}

TEST(SolveSupply, ObjectiveIsTheCashFlowDensityOfTheDecision) {
  const auto m = st::two_type_market();
  const auto d = solve_supply(m, budget(1.0), 4.0);
  EXPECT_DOUBLE_EQ(cash_flow_density(d, m, 4.0), d.objective);
}

TEST(SolveSupply, SaltExampleAtRatioTwoPicksHighSalt) {
  const double y = symmetric_salt_offset();
  const auto d = solve_supply(st::salt_market(2.0), st::salt_constraint(), 0.0);
  EXPECT_NEAR(d.style.product()[0], 2.97, 0.02);
  EXPECT_NEAR(d.style.product()[0], 2.0 + y, 1e-6);
  EXPECT_NEAR(d.style.storefront()[0], 2.0, 1e-9);
  EXPECT_NEAR(d.price, 1.0, 1e-9);
}

TEST(SolveSupply, SaltExampleTiesHaveTwoEqualCandidates) {
  const double y = symmetric_salt_offset();
  EXPECT_NEAR(2.0 - y, 1.05, 0.02);
  const auto m = st::salt_market(2.0);
  const double high = cash_flow_density(m, vec({2.0 + y, 2.0}), 1.0, 0.0);
  const double low = cash_flow_density(m, vec({2.0 - y, 2.0}), 1.0, 0.0);
  EXPECT_NEAR(high / low, 1.0, 1e-14);
}

TEST(SolveSupply, SaltExampleFollowsTheDominantType) {
  for (double ratio : {0.5, 1.0, 1.5, 1.9}) {
    const auto d = solve_supply(st::salt_market(ratio), st::salt_constraint(), 0.0);
    EXPECT_LT(d.style.product()[0], 2.0) << ratio;
  }
  double last = 0.0;
  for (double ratio : {2.1, 3.0, 5.0, 20.0}) {
    const auto d = solve_supply(st::salt_market(ratio), st::salt_constraint(), 0.0);
    EXPECT_GT(d.style.product()[0], 2.0) << ratio;
    EXPECT_GT(d.style.product()[0], last);
    EXPECT_LT(d.style.product()[0], 3.0);
    last = d.style.product()[0];
  }
}

TEST(SolveSupply, RejectsBadPriceInterval) {
  SupplyOptions o;
  o.theta_lo = 2.0;
  o.theta_hi = 1.0;
  EXPECT_THROW(solve_supply(st::two_type_market(), budget(1.0), 0.0, o), DomainError);
}

TEST(CashFlowDensity, AtTheIdealStyleOfASingleType) {
  const auto m = st::SingleTypeScenario{}.market().with_levels({2.5});
  const auto& c = m.consumer(0);
  const Vector z = m.ideal_joined(0, 3.0);
  const double theta = 1.7;
  const double expected = theta * c.share * 2.5 * m.transform(0)(c.offset_constant()) *
                          std::exp(-c.gamma * theta);
  EXPECT_NEAR(cash_flow_density(m, z, theta, 3.0) / expected, 1.0, 1e-14);
}

TEST(CashFlowDensity, DecreasesAsTheIdealDriftsAway) {
  const auto m = st::two_type_market();
  const auto d = solve_supply(m, budget(1.0), 0.0);
  double last = cash_flow_density(d, m, 0.0);
  for (double t = 1.0; t <= 100.0; t += 1.0) {
    const double v = cash_flow_density(d, m, t);
    EXPECT_LT(v, last);
    last = v;
  }
}

TEST(OrderingRule, PrefersTheFirstTypeAmongTies) {
  const auto m = st::salt_market(2.0);
  const std::vector<Candidate> cands{
      {vec({1.04, 2.0}), 1.0, 1.0}, {vec({2.96, 2.0}), 1.0, 1.0}, {vec({2.0, 2.0}), 1.0, 0.5}};
  EXPECT_EQ(select_by_ordering_rule(cands, m, 0.0), 1u);
}

TEST(OrderingRule, InvariantUnderPermutation) {
  const auto m = st::salt_market(2.0);
  std::vector<Candidate> cands{{vec({1.04, 2.0}), 1.0, 1.0},
                               {vec({2.96, 2.0}), 1.0, 1.0},
                               {vec({2.96, 2.0}), 1.0, 1.0},
                               {vec({2.5, 2.0}), 1.0, 1.0 - 1e-12},
                               {vec({0.0, 2.0}), 1.0, 0.2}};
  std::vector<int> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  const Vector expected = cands[select_by_ordering_rule(cands, m, 0.0)].z;
  do {
    std::vector<Candidate> shuffled;
    for (int i : order) shuffled.push_back(cands[i]);
    EXPECT_EQ(shuffled[select_by_ordering_rule(shuffled, m, 0.0)].z, expected);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(OrderingRule, DistinctSurvivorsAreADominanceViolation) {
  // One type whose ideal sits midway between two equal-objective styles.
  const auto m = st::SingleTypeScenario{}.market();
  const Vector ideal = m.ideal_joined(0, 0.0);
  const std::vector<Candidate> cands{{ideal + vec({0.5, 0.0}), 1.0, 1.0},
                                     {ideal - vec({0.5, 0.0}), 1.0, 1.0}};
  EXPECT_THROW(select_by_ordering_rule(cands, m, 0.0), DominanceViolation);
  EXPECT_THROW(select_by_ordering_rule(std::vector<Candidate>{}, m, 0.0), DomainError);
}

TEST(Lifespan, SingleTypeMatchesTheQuadraticRoot) {
  for (double c : {0.01, 0.05, 0.2}) {
    st::SingleTypeScenario s;
    s.c = c;
    const auto m = s.market();
    const auto d = solve_supply(m, budget(s.budget), 0.0);
    const double open = cash_flow_density(d, m, 0.0);
    const double r = 0.3 * open;
    // mu = lambda d.(z - z_hat) = 0 for the projected ideal; nu = lambda |d|^2 / 2.
    const double nu = 0.5 * s.lambda * c * c;
    const double expected = std::sqrt(std::log(open / r) / nu);
    EXPECT_NEAR(lifespan(d, m, {r}), expected, 1e-6);
  }
}

TEST(Lifespan, OffsetStyleMatchesTheQuadraticRoot) {
  // A decision whose product block leads the drifting ideal: mu > 0.
  const st::SingleTypeScenario s;
  const auto m = s.market();
  auto d = solve_supply(m, budget(s.budget), 0.0);
  d.style = StyleVector(d.style.product() + vec({0.8}), d.style.storefront());
  const double open = cash_flow_density(d, m, 0.0);
  const double mu = s.lambda * s.c * 0.8;
  const double nu = 0.5 * s.lambda * s.c * s.c;
  for (double frac : {0.9, 0.5, 0.1}) {
    const double r = frac * open;
    const double expected = (mu + std::sqrt(mu * mu + 4.0 * nu * std::log(open / r))) / (2.0 * nu);
    EXPECT_NEAR(lifespan(d, m, {r}), expected, 1e-6);
  }
}

TEST(Lifespan, ThresholdAtOpeningGivesZero) {
  const st::SingleTypeScenario s;
  const auto m = s.market();
  const auto d = solve_supply(m, budget(s.budget), 0.0);
  EXPECT_NEAR(lifespan(d, m, {cash_flow_density(d, m, 0.0)}), 0.0, 1e-6);
}

TEST(Lifespan, NeverOpensAndInfiniteCases) {
  const st::SingleTypeScenario s;
  const auto m = s.market();
  const auto d = solve_supply(m, budget(s.budget), 0.0);
  EXPECT_THROW(lifespan(d, m, {2.0 * cash_flow_density(d, m, 0.0)}), NeverOpens);
  EXPECT_THROW(lifespan(d, m, {0.0}), DomainError);
  st::SingleTypeScenario still = s;
  still.c = 0.0;
  const auto ms = still.market();
  const auto ds = solve_supply(ms, budget(s.budget), 0.0);
  EXPECT_EQ(lifespan(ds, ms, {0.5 * cash_flow_density(ds, ms, 0.0)}),
            std::numeric_limits<double>::infinity());
}

TEST(Lifespan, IndependentOfOpeningTime) {
  const auto m = st::two_type_market();
  const auto c = budget(1.0);
  const auto d0 = solve_supply(m, c, 0.0);
  const double r = 0.4 * d0.objective;
  const double base = lifespan(d0, m, {r});
  for (double t0 : {5.0, 25.0, 80.0}) {
    const auto d = solve_supply(m, c, t0);
    const Vector shift = t0 * m.drift_vector();
    EXPECT_LT((d.style.joined() - d0.style.joined() - shift).norm(), 1e-7);
    EXPECT_NEAR(d.price, d0.price, 1e-9);
    EXPECT_NEAR(d.objective / d0.objective, 1.0, 1e-10);
    for (double tau = 0.0; tau <= 2.0 * base; tau += base / 8.0)
      EXPECT_NEAR(cash_flow_density(d, m, t0 + tau) / cash_flow_density(d0, m, tau), 1.0, 1e-7);
  }
}

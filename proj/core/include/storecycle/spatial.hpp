#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

namespace storecycle::spatial {

using Point = Eigen::Vector2d;

struct StoreSite {
  Point location = Point::Zero();  // km
  double opening_time = 0.0;       // days
  double k = 1.0;                  // visibility broadening speed, km/day
  int index = 0;                   // 0 for the focal store

  /// Radius of the disk of people aware of the store at time t.
  double visibility_radius(double t) const;
  /// Uncompetitive attraction q_t(x) = 1{|x - x_i| <= k (t - t_i)} exp(-delta |x - x_i|).
  double attraction(const Point& x, double t, double delta) const;
};

struct SpatialScene {
  StoreSite focal;
  std::vector<StoreSite> competitors;
  double delta = 1.535;  // per km
  double u = 1.0;        // people per km^2

  /// Focal store first, then the competitors in order.
  std::vector<StoreSite> stores() const;
  void validate() const;
};

struct MonteCarloConfig {
  static constexpr std::size_t kMinSamples = 10'000;

  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  /// Defaults to ln(10^6) / delta.
  std::optional<double> truncation_radius;
  /// Independent sub-streams; the partition of samples does not depend on
  /// the number of threads, so results are reproducible.
  int streams = 16;

  double radius(double delta) const;
  void validate(double delta) const;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Default truncation radius ln(10^6) / delta.
double default_truncation_radius(double delta);

/// N_t = 2 pi (u / delta^2) (1 - (delta k t + 1) exp(-delta k t)).
double potential_customers_closed_form(double u, double delta, double k, double t);

/// q~_jt(x) = max_i q_it(x) * q_jt(x) / sum_i q_it(x) for every store, focal first.
std::vector<double> competitive_attraction(const SpatialScene& scene, const Point& x, double t);

/// Monte Carlo estimate of the focal store's flow, sampling x with density
/// proportional to exp(-delta |x - x_0|) on the focal visibility disk cut at
/// the truncation radius.
McEstimate potential_customers_mc(const SpatialScene& scene, double t, const MonteCarloConfig& cfg);

/// Competing-equivalent foot traffic density u', by nested adaptive
/// Gauss-Kronrod quadrature in polar coordinates around the focal store.
double equivalent_density(const SpatialScene& scene, double rel_tol = 1e-10,
                          std::optional<double> truncation_radius = std::nullopt);

}  // namespace storecycle::spatial

#include "storecycle/spatial.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/lambert_w.hpp>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <string>

#include "storecycle/errors.hpp"
#include "storecycle/numerics.hpp"

namespace storecycle::spatial {

namespace {

constexpr double kTwoPi = boost::math::constants::two_pi<double>();

/// 1 - (x + 1) exp(-x), accurate for small x.
double visible_mass_fraction(double x) {
  if (x <= 0.0) return 0.0;
  if (x < 0.5) {
    // sum_{n>=2} (-1)^n (n - 1) x^n / n!
    double power = x;
    double factorial = 1.0;
    double sum = 0.0;
    for (int n = 2; n < 40; ++n) {
      power *= x;
      factorial *= n;
      const double term = (n % 2 == 0 ? 1.0 : -1.0) * (n - 1) * power / factorial;
      sum += term;
      if (std::abs(term) < 1e-18 * sum) break;
    }
    return sum;
  }
  return -std::expm1(-x) - x * std::exp(-x);
}

struct StreamResult {
  double sum = 0.0;
  double sum_sq = 0.0;
};

}  // namespace

double StoreSite::visibility_radius(double t) const { return std::max(0.0, k * (t - opening_time)); }

double StoreSite::attraction(const Point& x, double t, double delta) const {
  const double dist = (x - location).norm();
  if (!(t > opening_time) || dist > visibility_radius(t)) return 0.0;
  return std::exp(-delta * dist);
}

std::vector<StoreSite> SpatialScene::stores() const {
  std::vector<StoreSite> out;
  out.reserve(competitors.size() + 1);
  out.push_back(focal);
  out.insert(out.end(), competitors.begin(), competitors.end());
  return out;
}

void SpatialScene::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("scene: delta must be positive");
  if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("scene: u must be positive");
  if (focal.index != 0) throw DomainError("scene: the focal store must have index 0");
  auto check = [](const StoreSite& s, const std::string& name) {
    if (!(s.k > 0.0) || !std::isfinite(s.k))
      throw DomainError("scene: " + name + " visibility speed must be positive");
    if (!s.location.allFinite() || !std::isfinite(s.opening_time))
      throw DomainError("scene: " + name + " location and opening time must be finite");
  };
  check(focal, "focal");
  for (std::size_t i = 0; i < competitors.size(); ++i)
    check(competitors[i], "competitor " + std::to_string(i + 1));
}

double default_truncation_radius(double delta) { return std::log(1e6) / delta; }

double MonteCarloConfig::radius(double delta) const {
  return truncation_radius ? *truncation_radius : default_truncation_radius(delta);
}

void MonteCarloConfig::validate(double delta) const {
  if (samples < kMinSamples)
    throw DomainError("monte carlo: at least " + std::to_string(kMinSamples) + " samples are required");
  if (streams < 1) throw DomainError("monte carlo: stream count must be positive");
  const double r = radius(delta);
  if (!(r > 0.0) || !std::isfinite(r))
    throw DomainError("monte carlo: truncation radius must be positive");
}

double potential_customers_closed_form(double u, double delta, double k, double t) {
  if (!(t > 0.0)) return 0.0;
  return kTwoPi * (u / (delta * delta)) * visible_mass_fraction(delta * k * t);
}

std::vector<double> competitive_attraction(const SpatialScene& scene, const Point& x, double t) {
  const auto stores = scene.stores();
  std::vector<double> q(stores.size());
  double total = 0.0;
  double top = 0.0;
  for (std::size_t i = 0; i < stores.size(); ++i) {
    q[i] = stores[i].attraction(x, t, scene.delta);
    total += q[i];
    top = std::max(top, q[i]);
  }
  if (!(total > 0.0)) return std::vector<double>(stores.size(), 0.0);
  for (auto& v : q) v = top * (v / total);
  return q;
}

McEstimate potential_customers_mc(const SpatialScene& scene, double t, const MonteCarloConfig& cfg) {
  scene.validate();
  cfg.validate(scene.delta);
  const double delta = scene.delta;
  const double rho = std::min(cfg.radius(delta), scene.focal.visibility_radius(t));
  McEstimate out;
  out.samples = cfg.samples;
  if (!(rho > 0.0)) return out;

  // Planar density exp(-delta r) on the disk of radius rho: uniform angle and
  // a truncated Gamma(2, delta) radius, inverted through Lambert W_{-1}.
  const double mass = kTwoPi / (delta * delta) * visible_mass_fraction(delta * rho);
  const double cdf_max = visible_mass_fraction(delta * rho);
  const auto stores = scene.stores();

  auto run_stream = [&](int s, std::size_t count) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    StreamResult acc;
    for (std::size_t n = 0; n < count; ++n) {
      const double p = cdf_max * unit(rng);
      const double w = boost::math::lambert_wm1(-(1.0 - p) / boost::math::constants::e<double>());
      const double r = std::min(rho, std::max(0.0, (-w - 1.0) / delta));
      const double angle = kTwoPi * unit(rng);
      const Point x = scene.focal.location + r * Point(std::cos(angle), std::sin(angle));
      double total = 0.0;
      double top = 0.0;
      for (const auto& store : stores) {
        const double q = store.attraction(x, t, delta);
        total += q;
        top = std::max(top, q);
      }
      // q~_0 / exp(-delta r) = max_i q_i / sum_i q_i inside the focal disk.
      const double value = total > 0.0 ? top / total : 0.0;
      acc.sum += value;
      acc.sum_sq += value * value;
    }
    return acc;
  };

  const std::size_t base = cfg.samples / static_cast<std::size_t>(cfg.streams);
  const std::size_t extra = cfg.samples % static_cast<std::size_t>(cfg.streams);
  std::vector<std::future<StreamResult>> jobs;
  for (int s = 0; s < cfg.streams; ++s) {
    const std::size_t count = base + (static_cast<std::size_t>(s) < extra ? 1 : 0);
    jobs.push_back(std::async(std::launch::async, run_stream, s, count));
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (auto& job : jobs) {
    const auto r = job.get();
    sum += r.sum;
    sum_sq += r.sum_sq;
  }
  const double n = static_cast<double>(cfg.samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  out.value = scene.u * mass * mean;
  out.std_error = scene.u * mass * std::sqrt(var / n);
  return out;
}

double equivalent_density(const SpatialScene& scene, double rel_tol,
                          std::optional<double> truncation_radius) {
  scene.validate();
  if (scene.competitors.empty()) return scene.u;
  const double delta = scene.delta;
  const double radius = truncation_radius ? *truncation_radius : default_truncation_radius(delta);
  if (!(radius > 0.0)) throw DomainError("equivalent_density: truncation radius must be positive");

  // Store positions relative to the focal store.
  std::vector<Point> rel;
  for (const auto& s : scene.stores()) rel.push_back(s.location - scene.focal.location);

  using boost::math::quadrature::gauss_kronrod;
  constexpr unsigned kDepth = 18;
  constexpr int kRayNodes = 64;

  // The radial integral along each ray is split where the nearest store
  // changes and where the ray passes closest to a store, then integrated
  // with a fixed rule, so the outer integrand is a deterministic function of
  // the angle.
  auto ray_integral = [&](double angle) {
    const Point e(std::cos(angle), std::sin(angle));
    std::vector<double> cuts{0.0, radius};
    for (const auto& p : rel) {
      const double closest = e.dot(p);
      if (closest > 0.0 && closest < radius) cuts.push_back(closest);
    }
    // Walk the ray through the nearest-store cells; the focal store sits at
    // the origin, so its cell holds the start of the ray.
    std::size_t current = 0;
    double travelled = 0.0;
    for (std::size_t step = 0; step < 4 * rel.size(); ++step) {
      double exit = radius;
      std::size_t next = current;
      for (std::size_t j = 0; j < rel.size(); ++j) {
        const double denom = 2.0 * e.dot(rel[j] - rel[current]);
        if (j == current || !(denom > 0.0)) continue;
        const double r = (rel[j].squaredNorm() - rel[current].squaredNorm()) / denom;
        if (r > travelled && r < exit) {
          exit = r;
          next = j;
        }
      }
      if (next == current) break;
      cuts.push_back(exit);
      travelled = exit;
      current = next;
    }
    for (int extra = 1; extra < 8; ++extra) cuts.push_back(radius * extra / 8.0);
    std::sort(cuts.begin(), cuts.end());
    auto integrand = [&](double r) {
      const Point x = r * e;
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& p : rel) nearest = std::min(nearest, (x - p).norm());
      double ratio = 0.0;
      for (const auto& p : rel) ratio += std::exp(-delta * ((x - p).norm() - nearest));
      return r * std::exp(-delta * r) / ratio;
    };
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      if (cuts[c + 1] <= cuts[c]) continue;
      total += numerics::integrate_gauss(integrand, cuts[c], cuts[c + 1], kRayNodes);
    }
    return total;
  };

  // The angular integrand has kinks where a ray passes through a store or a
  // vertex of the nearest-store cells; the angular range is split there.
  std::vector<double> angles{0.0, kTwoPi};
  auto add_angle = [&](const Point& p) {
    const double norm = p.norm();
    if (!(norm > 1e-12) || !(norm < radius)) return;
    const double a = std::atan2(p.y(), p.x());
    angles.push_back(a < 0.0 ? a + kTwoPi : a);
  };
  for (const auto& p : rel) add_angle(p);
  for (std::size_t i = 0; i < rel.size(); ++i)
    for (std::size_t j = i + 1; j < rel.size(); ++j)
      for (std::size_t k = j + 1; k < rel.size(); ++k) {
        const Point a = rel[j] - rel[i];
        const Point b = rel[k] - rel[i];
        const double det = 2.0 * (a.x() * b.y() - a.y() * b.x());
        if (std::abs(det) < 1e-14 * (a.squaredNorm() + b.squaredNorm())) continue;
        const Point c = rel[i] + Point(b.y() * a.squaredNorm() - a.y() * b.squaredNorm(),
                                       a.x() * b.squaredNorm() - b.x() * a.squaredNorm()) / det;
        const double d = (c - rel[i]).norm();
        bool vertex = true;
        for (std::size_t l = 0; l < rel.size() && vertex; ++l)
          vertex = (c - rel[l]).norm() >= d * (1.0 - 1e-12);
        if (vertex) add_angle(c);
      }
  std::sort(angles.begin(), angles.end());
  // Vertices shared by several triples come out with differing rounding;
  // slivers between nearly equal breakpoints are merged away.
  std::vector<double> pieces{0.0};
  for (double a : angles)
    if (a - pieces.back() > 1e-9) pieces.push_back(a);
  pieces.back() = kTwoPi;

  double integral = 0.0;
  double outer_error = 0.0;
  for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
    double error = 0.0;
    integral += gauss_kronrod<double, 31>::integrate(ray_integral, pieces[i], pieces[i + 1], kDepth,
                                                     rel_tol, &error);
    outer_error += error;
  }
  if (!std::isfinite(integral) || outer_error > 100.0 * rel_tol * std::abs(integral))
    throw QuadratureError("equivalent_density: quadrature error estimate " +
                          std::to_string(outer_error) + " exceeds the tolerance");
  return scene.u * (delta * delta / kTwoPi) * integral;
}

}  // namespace storecycle::spatial

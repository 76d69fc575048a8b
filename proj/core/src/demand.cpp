#include "storecycle/demand.hpp"

#include <cmath>
#include <string>

#include "storecycle/errors.hpp"
#include "storecycle/numerics.hpp"

namespace storecycle::demand {

namespace {

constexpr int kNodesPerPanel = 64;

void validate_segment(const Segment& s) {
  if (!(s.length > 0.0) || !std::isfinite(s.length))
    throw DomainError("style segment: length must be positive and finite");
  if (std::abs(s.direction.joined().norm() - 1.0) > 1e-9)
    throw DomainError("style segment: direction must have unit length");
  if (s.direction.dim() != s.base.dim()) throw DomainError("style segment: dimension mismatch");
  if (!s.price) throw DomainError("style segment: missing price map");
  if (!(s.weight > 0.0) || !std::isfinite(s.weight))
    throw DomainError("style segment: weight must be positive and finite");
}

}  // namespace

StyleSet StyleSet::segments(std::vector<Segment> segments) {
  if (segments.empty()) throw DomainError("style set: no segments");
  for (const auto& s : segments) validate_segment(s);
  return StyleSet(std::move(segments));
}

StyleSet StyleSet::discretized(std::vector<DiscretePoint> points) {
  if (points.empty()) throw DomainError("style set: no points");
  double total = 0.0;
  for (const auto& p : points) {
    if (!(p.price > 0.0) || !std::isfinite(p.price))
      throw DomainError("style set: prices must be positive");
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
      throw DomainError("style set: weights must be nonnegative and finite");
    total += p.weight;
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw DomainError("style set: total weight must be positive and finite");
  return StyleSet(std::move(points));
}

double StyleSet::measure() const {
  double total = 0.0;
  if (has_segments()) {
    for (const auto& s : segment_list()) total += s.weight * s.length;
  } else {
    for (const auto& p : point_list()) total += p.weight;
  }
  return total;
}

double StyleSet::integrate(const Integrand& f, double rel_tol) const {
  double total = 0.0;
  if (has_segments()) {
    for (const auto& s : segment_list()) {
      const Vector base = s.base.joined();
      const Vector dir = s.direction.joined();
      auto along = [&](double offset) {
        const double price = s.price(offset);
        if (!(price > 0.0)) throw DomainError("style segment: price map returned a non-positive price");
        return f(base + offset * dir, price);
      };
      total += s.weight *
               numerics::integrate_composite(along, 0.0, s.length, kNodesPerPanel, rel_tol);
    }
  } else {
    for (const auto& p : point_list()) total += p.weight * f(p.style.joined(), p.price);
  }
  return total;
}

StyleSet StyleSet::translated(const Vector& offset) const {
  if (has_segments()) {
    auto segs = segment_list();
    for (auto& s : segs)
      s.base = StyleVector::from_joined(s.base.joined() + offset, s.base.product_dim());
    return StyleSet(std::move(segs));
  }
  auto pts = point_list();
  for (auto& p : pts)
    p.style = StyleVector::from_joined(p.style.joined() + offset, p.style.product_dim());
  return StyleSet(std::move(pts));
}

PurchaseDensity::PurchaseDensity(Market market, StyleSet styles, double t,
                                 std::vector<double> levels)
    : market_(std::move(market)), styles_(std::move(styles)), t_(t), levels_(std::move(levels)) {
  if (levels_.size() != market_.size()) throw DomainError("purchase density: level count mismatch");
}

double PurchaseDensity::operator()(std::size_t j, const Vector& z, double price) const {
  return levels_.at(j) * market_.score_joined(j, z, price, t_);
}

double PurchaseDensity::operator()(std::size_t j, const StyleVector& z, double price) const {
  return (*this)(j, z.joined(), price);
}

double PurchaseDensity::total_mass(std::size_t j) const {
  return styles_.integrate([&](const Vector& z, double price) { return (*this)(j, z, price); });
}

PurchaseDensity optimal_density(const Market& market, const StyleSet& styles, double t) {
  if (!std::isfinite(t)) throw DomainError("optimal_density: time must be finite");
  if (!(styles.measure() > 0.0)) throw DomainError("optimal_density: style set has zero measure");
  std::vector<double> levels;
  levels.reserve(market.size());
  for (std::size_t j = 0; j < market.size(); ++j) {
    const double mass = styles.integrate(
        [&](const Vector& z, double price) { return market.score_joined(j, z, price, t); });
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw QuadratureError("optimal_density: normalizing integral of type " + std::to_string(j) +
                            " is not positive and finite");
    levels.push_back(1.0 / mass);
  }
  return PurchaseDensity(market, styles, t, std::move(levels));
}

double utility(const PurchaseDensity& density, std::size_t j) {
  return utility([&](const Vector& z, double price) { return density(j, z, price); },
                 density.market(), j, density.styles(), density.time());
}

double utility(const StyleSet::Integrand& rho, const Market& market, std::size_t j,
               const StyleSet& styles, double t) {
  return styles.integrate([&](const Vector& z, double price) {
    const double r = rho(z, price);
    if (!(r > 0.0)) throw DomainError("utility: density is not strictly positive on the style set");
    return market.score_joined(j, z, price, t) * std::log(r);
  });
}

}  // namespace storecycle::demand

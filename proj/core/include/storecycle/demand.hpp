#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "storecycle/style_space.hpp"

namespace storecycle::demand {

using style::Market;
using style::StyleVector;
using style::Vector;

/// Styles base + s * direction for s in [0, length], integrated by arc length
/// with a constant measure `weight` per unit length.
struct Segment {
  StyleVector base;
  StyleVector direction;  // unit length
  double length = 0.0;
  std::function<double(double)> price;  // offset s -> price
  double weight = 1.0;
};

struct DiscretePoint {
  StyleVector style;
  double price = 1.0;
  double weight = 1.0;  // quadrature weight
};

/// The bounded set of styles on offer, either a union of segments or a
/// weighted sample of points.
class StyleSet {
 public:
  using Integrand = std::function<double(const Vector& z, double price)>;

  static StyleSet segments(std::vector<Segment> segments);
  static StyleSet discretized(std::vector<DiscretePoint> points);

  bool has_segments() const { return std::holds_alternative<std::vector<Segment>>(rep_); }
  const std::vector<Segment>& segment_list() const { return std::get<std::vector<Segment>>(rep_); }
  const std::vector<DiscretePoint>& point_list() const {
    return std::get<std::vector<DiscretePoint>>(rep_);
  }

  /// Total quadrature mass of the set.
  double measure() const;

  /// Integral of f over the set. Segments use composite 64-node Gauss-Legendre
  /// refined until the relative change drops below rel_tol.
  double integrate(const Integrand& f, double rel_tol = 1e-10) const;

  /// The same set translated by `offset` (a joined style-space vector).
  StyleSet translated(const Vector& offset) const;

 private:
  explicit StyleSet(std::variant<std::vector<Segment>, std::vector<DiscretePoint>> rep)
      : rep_(std::move(rep)) {}
  std::variant<std::vector<Segment>, std::vector<DiscretePoint>> rep_;
};

/// rho_jt(z) = K_jt F_jt(z, theta(z)) restricted to the offered styles.
class PurchaseDensity {
 public:
  PurchaseDensity(Market market, StyleSet styles, double t, std::vector<double> levels);

  double level(std::size_t j) const { return levels_.at(j); }
  const std::vector<double>& levels() const { return levels_; }
  double time() const { return t_; }
  const Market& market() const { return market_; }
  const StyleSet& styles() const { return styles_; }

  /// Density of type j at an offered style with its price.
  double operator()(std::size_t j, const Vector& z, double price) const;
  double operator()(std::size_t j, const StyleVector& z, double price) const;

  /// Integral of rho_j over the style set; 1 up to quadrature error.
  double total_mass(std::size_t j) const;

 private:
  Market market_;
  StyleSet styles_;
  double t_;
  std::vector<double> levels_;
};

/// Each type's utility-maximizing density over `styles` at time t.
PurchaseDensity optimal_density(const Market& market, const StyleSet& styles, double t);

/// Cobb-Douglas utility of type j: integral of F_jt ln(rho) over the set.
double utility(const PurchaseDensity& density, std::size_t j);

/// Utility of an arbitrary density `rho` (evaluated at the style and its
/// price). Throws DomainError if rho is not strictly positive on the set.
double utility(const StyleSet::Integrand& rho, const Market& market, std::size_t j,
               const StyleSet& styles, double t);

}  // namespace storecycle::demand

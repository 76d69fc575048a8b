#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace storecycle::style {

using Vector = Eigen::VectorXd;

/// A point z = (x, xi) of the style space: p product attributes followed by
/// q storefront attributes.
class StyleVector {
 public:
  StyleVector(Vector product, Vector storefront);

  /// Splits a joined (p+q)-vector after its first p entries.
  static StyleVector from_joined(const Vector& joined, Eigen::Index product_dim);

  const Vector& product() const { return product_; }
  const Vector& storefront() const { return storefront_; }
  Eigen::Index product_dim() const { return product_.size(); }
  Eigen::Index storefront_dim() const { return storefront_.size(); }
  Eigen::Index dim() const { return product_.size() + storefront_.size(); }

  Vector joined() const;

  friend StyleVector operator+(const StyleVector& lhs, const StyleVector& rhs);
  friend StyleVector operator-(const StyleVector& lhs, const StyleVector& rhs);
  friend StyleVector operator*(double s, const StyleVector& v);

 private:
  Vector product_;
  Vector storefront_;
};

enum class TransformKind { Exponential, InversePower };

/// Unbound description of a transform function; the domain cap is attached
/// per consumer type when a Market is built.
struct TransformSpec {
  TransformKind kind = TransformKind::Exponential;
  double kappa = 1.0;  // Exponential: phi(u) = exp(kappa u)
  double alpha = 2.0;  // InversePower: phi(u) = (C + c_eps - u)^(-alpha)
  double c_eps = 1.0;

  void validate() const;
};

/// Positive, strictly increasing, integrable map on (-inf, cap].
class TransformFunction {
 public:
  static TransformFunction exponential(double kappa, double cap);
  static TransformFunction inverse_power(double alpha, double c_eps, double cap);
  static TransformFunction bind(const TransformSpec& spec, double cap);

  /// Throws DomainError when u > cap.
  double operator()(double u) const;
  double derivative(double u) const;
  double log_value(double u) const;
  /// phi'(u) / phi(u).
  double log_derivative(double u) const;
  /// Closed-form value of the integral of phi over (-inf, cap].
  double integral_to_cap() const;

  TransformKind kind() const { return spec_.kind; }
  const TransformSpec& spec() const { return spec_; }
  double cap() const { return cap_; }

 private:
  TransformFunction(TransformSpec spec, double cap) : spec_(spec), cap_(cap) {}
  void check_domain(double u) const;

  TransformSpec spec_;
  double cap_;
};

/// One consumer segment.
struct ConsumerType {
  Vector a;             // product preference weights, dim p
  Vector b;             // storefront preference weights, dim q
  double lambda = 1.0;  // deviation aversion
  double gamma = 1.0;   // price aversion
  double share = 1.0;   // population share P^(j)
  double level = 1.0;   // purchase-probability level K_j

  /// The constant C_j = (a'a + b'b) / (2 lambda) of the rewritten score.
  double offset_constant() const;
  void validate() const;
};

/// Linear drift of the traditional product style; the storefront part is zero.
struct PreferenceDrift {
  Vector c;

  /// d = (c', 0')' with q trailing zeros.
  Vector full(Eigen::Index storefront_dim) const;
};

struct TraditionalStyle {
  Vector x_bar0;
  Vector xi_bar0;

  StyleVector at(const PreferenceDrift& drift, double t) const;
};

/// z_hat_{j,t} = (a/lambda + x_bar_t, b/lambda + xi_bar_t).
StyleVector optimal_preference_style(const ConsumerType& c, const TraditionalStyle& trad,
                                     const PreferenceDrift& drift, double t);

/// F_jt(z, theta) = phi(C_j - lambda/2 |z - z_hat_{j,t}|^2) exp(-gamma theta).
double score(const ConsumerType& c, const TraditionalStyle& trad, const PreferenceDrift& drift,
             const TransformFunction& phi, const StyleVector& z, double theta, double t);

/// Validated bundle of a consumer population with its shared traditional
/// style, drift and transform. The transform of type j is capped at C_j + 1.
class Market {
 public:
  Market(std::vector<ConsumerType> consumers, TraditionalStyle traditional,
         PreferenceDrift drift, TransformSpec transform = {});

  std::size_t size() const { return consumers_.size(); }
  Eigen::Index product_dim() const { return traditional_.x_bar0.size(); }
  Eigen::Index storefront_dim() const { return traditional_.xi_bar0.size(); }
  Eigen::Index dim() const { return product_dim() + storefront_dim(); }

  const std::vector<ConsumerType>& consumers() const { return consumers_; }
  const ConsumerType& consumer(std::size_t j) const { return consumers_.at(j); }
  const TraditionalStyle& traditional() const { return traditional_; }
  const PreferenceDrift& drift() const { return drift_; }
  const TransformSpec& transform_spec() const { return transform_spec_; }
  const TransformFunction& transform(std::size_t j) const { return transforms_.at(j); }

  /// Joined drift vector d of dimension p+q.
  const Vector& drift_vector() const { return drift_full_; }

  StyleVector ideal(std::size_t j, double t) const;
  /// Joined ideal style z_hat_{j,t}.
  Vector ideal_joined(std::size_t j, double t) const;

  double score(std::size_t j, const StyleVector& z, double theta, double t) const;
  /// Score on a joined (p+q)-vector; the hot path of quadrature and supply.
  double score_joined(std::size_t j, const Vector& z, double theta, double t) const;

  std::vector<double> levels() const;
  Market with_levels(const std::vector<double>& levels) const;

 private:
  std::vector<ConsumerType> consumers_;
  TraditionalStyle traditional_;
  PreferenceDrift drift_;
  TransformSpec transform_spec_;
  Vector drift_full_;
  std::vector<TransformFunction> transforms_;
  std::vector<Vector> ideals_at_zero_;
};

}  // namespace storecycle::style

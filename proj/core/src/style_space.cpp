#include "storecycle/style_space.hpp"

#include <cmath>
#include <string>

#include "storecycle/errors.hpp"

namespace storecycle::style {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

StyleVector::StyleVector(Vector product, Vector storefront)
    : product_(std::move(product)), storefront_(std::move(storefront)) {
  if (product_.size() < 1 || storefront_.size() < 1)
    throw DomainError("StyleVector: product and storefront blocks need dimension >= 1");
  if (!all_finite(product_) || !all_finite(storefront_))
    throw DomainError("StyleVector: entries must be finite");
}

StyleVector StyleVector::from_joined(const Vector& joined, Eigen::Index product_dim) {
  if (product_dim < 1 || product_dim >= joined.size())
    throw DomainError("StyleVector::from_joined: bad split point");
  return StyleVector(joined.head(product_dim), joined.tail(joined.size() - product_dim));
}

Vector StyleVector::joined() const {
  Vector z(dim());
  z << product_, storefront_;
  return z;
}

StyleVector operator+(const StyleVector& lhs, const StyleVector& rhs) {
  return StyleVector(lhs.product_ + rhs.product_, lhs.storefront_ + rhs.storefront_);
}

StyleVector operator-(const StyleVector& lhs, const StyleVector& rhs) {
  return StyleVector(lhs.product_ - rhs.product_, lhs.storefront_ - rhs.storefront_);
}

StyleVector operator*(double s, const StyleVector& v) {
  return StyleVector(s * v.product_, s * v.storefront_);
}

void TransformSpec::validate() const {
  switch (kind) {
    case TransformKind::Exponential:
      if (!(kappa > 0.0) || !std::isfinite(kappa))
        throw DomainError("exponential transform requires kappa > 0");
      break;
    case TransformKind::InversePower:
      if (!(alpha > 1.0) || !std::isfinite(alpha))
        throw DomainError("inverse-power transform requires alpha > 1");
      if (!(c_eps > 0.0) || !std::isfinite(c_eps))
        throw DomainError("inverse-power transform requires c_eps > 0");
      break;
  }
}

TransformFunction TransformFunction::exponential(double kappa, double cap) {
  TransformSpec spec;
  spec.kind = TransformKind::Exponential;
  spec.kappa = kappa;
  return bind(spec, cap);
}

TransformFunction TransformFunction::inverse_power(double alpha, double c_eps, double cap) {
  TransformSpec spec;
  spec.kind = TransformKind::InversePower;
  spec.alpha = alpha;
  spec.c_eps = c_eps;
  return bind(spec, cap);
}

TransformFunction TransformFunction::bind(const TransformSpec& spec, double cap) {
  spec.validate();
  if (!std::isfinite(cap)) throw DomainError("transform cap must be finite");
  return TransformFunction(spec, cap);
}

void TransformFunction::check_domain(double u) const {
  if (u > cap_)
    throw DomainError("transform argument " + std::to_string(u) + " exceeds the domain cap " +
                      std::to_string(cap_));
}

double TransformFunction::operator()(double u) const {
  check_domain(u);
  if (spec_.kind == TransformKind::Exponential) return std::exp(spec_.kappa * u);
  return std::pow(cap_ + spec_.c_eps - u, -spec_.alpha);
}

double TransformFunction::derivative(double u) const {
  check_domain(u);
  if (spec_.kind == TransformKind::Exponential) return spec_.kappa * std::exp(spec_.kappa * u);
  return spec_.alpha * std::pow(cap_ + spec_.c_eps - u, -spec_.alpha - 1.0);
}

double TransformFunction::log_value(double u) const {
  check_domain(u);
  if (spec_.kind == TransformKind::Exponential) return spec_.kappa * u;
  return -spec_.alpha * std::log(cap_ + spec_.c_eps - u);
}

double TransformFunction::log_derivative(double u) const {
  check_domain(u);
  if (spec_.kind == TransformKind::Exponential) return spec_.kappa;
  return spec_.alpha / (cap_ + spec_.c_eps - u);
}

double TransformFunction::integral_to_cap() const {
  if (spec_.kind == TransformKind::Exponential) return std::exp(spec_.kappa * cap_) / spec_.kappa;
  return std::pow(spec_.c_eps, 1.0 - spec_.alpha) / (spec_.alpha - 1.0);
}

double ConsumerType::offset_constant() const {
  return (a.squaredNorm() + b.squaredNorm()) / (2.0 * lambda);
}

void ConsumerType::validate() const {
  if (a.size() < 1 || b.size() < 1) throw DomainError("consumer type: a and b need dimension >= 1");
  if (!a.allFinite() || !b.allFinite()) throw DomainError("consumer type: a, b must be finite");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("consumer type: lambda must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("consumer type: gamma must be > 0");
  if (!(share > 0.0) || share > 1.0) throw DomainError("consumer type: share must lie in (0, 1]");
  if (!(level > 0.0) || !std::isfinite(level)) throw DomainError("consumer type: level must be > 0");
}

Vector PreferenceDrift::full(Eigen::Index storefront_dim) const {
  Vector d = Vector::Zero(c.size() + storefront_dim);
  d.head(c.size()) = c;
  return d;
}

StyleVector TraditionalStyle::at(const PreferenceDrift& drift, double t) const {
  return StyleVector(x_bar0 + t * drift.c, xi_bar0);
}

StyleVector optimal_preference_style(const ConsumerType& c, const TraditionalStyle& trad,
                                     const PreferenceDrift& drift, double t) {
  return StyleVector(c.a / c.lambda + trad.x_bar0 + t * drift.c, c.b / c.lambda + trad.xi_bar0);
}

double score(const ConsumerType& c, const TraditionalStyle& trad, const PreferenceDrift& drift,
             const TransformFunction& phi, const StyleVector& z, double theta, double t) {
  if (!(theta >= 0.0)) throw DomainError("score: price must be nonnegative");
  const StyleVector ideal = optimal_preference_style(c, trad, drift, t);
  const double dist2 = (z.product() - ideal.product()).squaredNorm() +
                       (z.storefront() - ideal.storefront()).squaredNorm();
  return phi(c.offset_constant() - 0.5 * c.lambda * dist2) * std::exp(-c.gamma * theta);
}

Market::Market(std::vector<ConsumerType> consumers, TraditionalStyle traditional,
               PreferenceDrift drift, TransformSpec transform)
    : consumers_(std::move(consumers)),
      traditional_(std::move(traditional)),
      drift_(std::move(drift)),
      transform_spec_(transform) {
  if (consumers_.empty()) throw DomainError("market: population is empty");
  const auto p = traditional_.x_bar0.size();
  const auto q = traditional_.xi_bar0.size();
  if (p < 1 || q < 1) throw DomainError("market: traditional style needs p >= 1 and q >= 1");
  if (!traditional_.x_bar0.allFinite() || !traditional_.xi_bar0.allFinite())
    throw DomainError("market: traditional style must be finite");
  if (drift_.c.size() != p) throw DomainError("market: drift dimension must equal p");
  if (!drift_.c.allFinite()) throw DomainError("market: drift must be finite");
  transform_spec_.validate();
  double share_sum = 0.0;
  for (std::size_t j = 0; j < consumers_.size(); ++j) {
    const auto& c = consumers_[j];
    c.validate();
    if (c.a.size() != p || c.b.size() != q)
      throw DomainError("market: consumer type " + std::to_string(j) +
                        " has preference dimensions inconsistent with the traditional style");
    share_sum += c.share;
  }
  if (std::abs(share_sum - 1.0) > 1e-12)
    throw DomainError("market: population shares must sum to 1");
  drift_full_ = drift_.full(q);
  for (const auto& c : consumers_) {
    transforms_.push_back(TransformFunction::bind(transform_spec_, c.offset_constant() + 1.0));
    ideals_at_zero_.push_back(optimal_preference_style(c, traditional_, drift_, 0.0).joined());
  }
}

StyleVector Market::ideal(std::size_t j, double t) const {
  return StyleVector::from_joined(ideal_joined(j, t), product_dim());
}

Vector Market::ideal_joined(std::size_t j, double t) const {
  return ideals_at_zero_.at(j) + t * drift_full_;
}

double Market::score(std::size_t j, const StyleVector& z, double theta, double t) const {
  return score_joined(j, z.joined(), theta, t);
}

double Market::score_joined(std::size_t j, const Vector& z, double theta, double t) const {
  if (!(theta >= 0.0)) throw DomainError("score: price must be nonnegative");
  const auto& c = consumers_[j];
  const double dist2 = (z - ideals_at_zero_[j] - t * drift_full_).squaredNorm();
  return transforms_[j](c.offset_constant() - 0.5 * c.lambda * dist2) *
         std::exp(-c.gamma * theta);
}

std::vector<double> Market::levels() const {
  std::vector<double> out;
  out.reserve(consumers_.size());
  for (const auto& c : consumers_) out.push_back(c.level);
  return out;
}

Market Market::with_levels(const std::vector<double>& levels) const {
  if (levels.size() != consumers_.size()) throw DomainError("with_levels: size mismatch");
  auto consumers = consumers_;
  for (std::size_t j = 0; j < levels.size(); ++j) consumers[j].level = levels[j];
  return Market(std::move(consumers), traditional_, drift_, transform_spec_);
}

}  // namespace storecycle::style

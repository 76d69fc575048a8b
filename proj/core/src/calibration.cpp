#include "storecycle/calibration.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>

#include "storecycle/cashflow.hpp"
#include "storecycle/errors.hpp"
#include "storecycle/spatial.hpp"

namespace storecycle::calibration {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr std::size_t kMinObservations = 28;

/// Textbook adjugate inverse of a symmetric 3x3 matrix.
Mat3 inverse_3x3(const Mat3& a) {
  Mat3 cof{};
  cof[0][0] = a[1][1] * a[2][2] - a[1][2] * a[2][1];
  cof[0][1] = a[1][2] * a[2][0] - a[1][0] * a[2][2];
  cof[0][2] = a[1][0] * a[2][1] - a[1][1] * a[2][0];
  cof[1][0] = a[0][2] * a[2][1] - a[0][1] * a[2][2];
  cof[1][1] = a[0][0] * a[2][2] - a[0][2] * a[2][0];
  cof[1][2] = a[0][1] * a[2][0] - a[0][0] * a[2][1];
  cof[2][0] = a[0][1] * a[1][2] - a[0][2] * a[1][1];
  cof[2][1] = a[0][2] * a[1][0] - a[0][0] * a[1][2];
  cof[2][2] = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  const double det = a[0][0] * cof[0][0] + a[0][1] * cof[0][1] + a[0][2] * cof[0][2];
  const double scale = a[0][0] * a[1][1] * a[2][2];
  if (!(scale > 0.0) || !(det / scale > 1e-13) || !std::isfinite(det))
    throw RankDeficient("newey_west: the Jacobian does not have full column rank");
  Mat3 inv{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inv[i][j] = cof[j][i] / det;
  return inv;
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l) s += a[i][l] * b[l][j];
      c[i][j] = s;
    }
  return c;
}

struct Bounds {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
};

ModelParams from_log(const Eigen::Vector3d& y) { return {std::exp(y[0]), std::exp(y[1]), std::exp(y[2])}; }

struct Trial {
  Eigen::Vector3d y;
  double ssr = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

double sum_squared_residuals(const FixedInputs& fixed, const ModelParams& p,
                             const Eigen::VectorXd& times, const Eigen::VectorXd& values) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    const double r = values[i] - model_value(fixed, p, times[i]);
    s += r * r;
  }
  return s;
}

Trial levenberg_marquardt(const FixedInputs& fixed, const Eigen::VectorXd& times,
                          const Eigen::VectorXd& values, Eigen::Vector3d y, const Bounds& bounds,
                          int max_iter) {
  const Eigen::Index n = times.size();
  auto clamp = [&](Eigen::Vector3d v) { return v.cwiseMax(bounds.lo).cwiseMin(bounds.hi); };
  y = clamp(y);
  Trial out;
  out.y = y;
  out.ssr = sum_squared_residuals(fixed, from_log(y), times, values);
  if (!std::isfinite(out.ssr)) return out;
  double damping = 1e-3;
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    const ModelParams p = from_log(out.y);
    Eigen::MatrixXd J = jacobian(fixed, p, times);
    J.col(0) *= p.k;
    J.col(1) *= p.nu;
    J.col(2) *= p.beta0;
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = values[i] - model_value(fixed, p, times[i]);
    const Eigen::Matrix3d A = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    if (out.ssr == 0.0) break;

    bool accepted = false;
    while (damping < 1e20) {
      Eigen::Matrix3d M = A;
      for (int i = 0; i < 3; ++i) M(i, i) += damping * std::max(A(i, i), 1e-300);
      const Eigen::Vector3d step = M.ldlt().solve(g);
      const Eigen::Vector3d y_new = clamp(out.y + step);
      const double ssr_new = sum_squared_residuals(fixed, from_log(y_new), times, values);
      if (std::isfinite(ssr_new) && ssr_new < out.ssr) {
        const double gain = out.ssr - ssr_new;
        const double moved = (y_new - out.y).cwiseAbs().maxCoeff();
        out.y = y_new;
        out.ssr = ssr_new;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        if (gain <= 1e-15 * out.ssr && moved <= 1e-10) return out;
        break;
      }
      damping *= 4.0;
    }
    if (!accepted) break;
  }
  return out;
}

bool on_bound(double v, double lo, double hi) {
  return std::abs(v - lo) <= 1e-9 * std::abs(lo) || std::abs(v - hi) <= 1e-9 * std::abs(hi);
}

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
    throw InputError("invalid date '" + text + "', expected YYYY-MM-DD");
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (text[i] < '0' || text[i] > '9') throw InputError("invalid date '" + text + "', expected YYYY-MM-DD");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw InputError("invalid calendar date '" + text + "'");
  return Date{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Eigen::VectorXd CashFlowSeries::times() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) out[static_cast<Eigen::Index>(i)] = observations[i].t;
  return out;
}

Eigen::VectorXd CashFlowSeries::values() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = observations[i].value;
  return out;
}

void FixedInputs::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(delta_hat) || !positive(u_prime_hat) || !positive(theta_bar))
    throw DomainError("fixed inputs: delta, u' and theta must be positive");
}

double model_value(const FixedInputs& fixed, const ModelParams& p, double t) {
  return spatial::potential_customers_closed_form(fixed.u_prime_hat, fixed.delta_hat, p.k, t) *
         fixed.theta_bar * p.beta0 * std::exp(-p.nu * t * t);
}

Eigen::MatrixXd jacobian(const FixedInputs& fixed, const ModelParams& p, const Eigen::VectorXd& times) {
  const double delta = fixed.delta_hat;
  const double scale = 2.0 * M_PI * fixed.u_prime_hat * fixed.theta_bar / (delta * delta);
  Eigen::MatrixXd J(times.size(), 3);
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double h = model_value(fixed, p, t);
    const double decay = std::exp(-p.nu * t * t);
    J(i, 0) = scale * p.beta0 * decay * delta * delta * p.k * t * t * std::exp(-delta * p.k * t);
    J(i, 1) = -t * t * h;
    J(i, 2) = h / p.beta0;
  }
  return J;
}

Eigen::Matrix3d newey_west(const Eigen::MatrixXd& J, const Eigen::VectorXd& e, int lags) {
  const Eigen::Index n = J.rows();
  if (J.cols() != 3) throw DomainError("newey_west: the Jacobian must have three columns");
  if (e.size() != n) throw DomainError("newey_west: residual count must match the Jacobian rows");
  if (lags < 0 || n <= lags) throw DomainError("newey_west: requires n > L >= 0");

  Mat3 jtj{};
  Mat3 s{};
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      double m = 0.0;
      double v = 0.0;
      for (Eigen::Index t = 0; t < n; ++t) {
        m += J(t, a) * J(t, b);
        v += e[t] * e[t] * J(t, a) * J(t, b);
      }
      for (int l = 1; l <= lags; ++l) {
        const double w = 1.0 - static_cast<double>(l) / static_cast<double>(lags + 1);
        for (Eigen::Index t = l; t < n; ++t)
          v += w * e[t] * e[t - l] * (J(t, a) * J(t - l, b) + J(t - l, a) * J(t, b));
      }
      jtj[a][b] = jtj[b][a] = m;
      s[a][b] = s[b][a] = v;
    }
  }
  Mat3 omega{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) omega[a][b] = s[a][b] / static_cast<double>(n);
  const Mat3 inv = inverse_3x3(jtj);
  const Mat3 sandwich = multiply(multiply(inv, omega), inv);
  Eigen::Matrix3d out;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      out(a, b) = static_cast<double>(n) * (0.5 * (sandwich[a][b] + sandwich[b][a]));
  return out;
}

CashFlowSeries ingest(std::vector<RawObservation> raw) {
  if (raw.size() < kMinObservations)
    throw InsufficientData("ingest: at least 28 observations are required, got " +
                           std::to_string(raw.size()));
  std::map<Date, double> observed;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    if (!(r.value >= 0.0) || !std::isfinite(r.value))
      throw InputError("ingest: observation " + std::to_string(i + 1) + " (" + format_date(r.date) +
                       ") has a negative or non-finite value");
    if (i > 0 && !(r.date > raw[i - 1].date))
      throw InputError("ingest: dates must be strictly increasing (observation " +
                       std::to_string(i + 1) + ", " + format_date(r.date) + ")");
    observed.emplace(r.date, r.value);
  }
  const Date first = raw.front().date;
  const Date last = raw.back().date;
  if ((last - first).count() < 27)
    throw InsufficientData("ingest: observations must span at least four weeks");

  auto neighbour = [&](Date d, int direction) -> std::optional<double> {
    for (int weeks : {1, 2}) {
      const auto it = observed.find(d + std::chrono::days{7 * weeks * direction});
      if (it != observed.end()) return it->second;
    }
    return std::nullopt;
  };

  CashFlowSeries out;
  out.frequency = Frequency::Daily;
  double t = 1.0;
  for (Date d = first; d <= last; d += std::chrono::days{1}, t += 1.0) {
    const auto it = observed.find(d);
    if (it != observed.end()) {
      out.observations.push_back({d, it->second, true, t});
      continue;
    }
    const auto before = neighbour(d, -1);
    const auto after = neighbour(d, +1);
    double value = 0.0;
    if (before && after) {
      value = 0.5 * (*before + *after);
    } else if (before || after) {
      value = before ? *before : *after;
    } else {
      throw UnfillableGap("ingest: no same-weekday observation within two weeks of " +
                          format_date(d));
    }
    out.observations.push_back({d, value, false, t});
  }
  return out;
}

CashFlowSeries aggregate(const CashFlowSeries& series, Frequency frequency) {
  if (series.frequency != Frequency::Daily)
    throw DomainError("aggregate: the input series must be daily");
  if (series.observations.empty()) throw DomainError("aggregate: empty series");
  if (frequency == Frequency::Daily) return series;
  const auto& obs = series.observations;
  for (std::size_t i = 1; i < obs.size(); ++i)
    if (obs[i].date - obs[i - 1].date != std::chrono::days{1})
      throw DomainError("aggregate: the input series must be gap-free");

  const Date start = obs.front().date;
  const std::chrono::year_month_day anchor{start};
  auto block_end = [&](int index) -> Date {
    if (frequency == Frequency::Weekly) return start + std::chrono::days{7 * (index + 1)};
    auto ym = anchor.year() / anchor.month() + std::chrono::months{index + 1};
    const auto last_day = std::chrono::year_month_day_last{ym.year(), std::chrono::month_day_last{ym.month()}}.day();
    return Date{ym.year() / ym.month() / std::min(anchor.day(), last_day)};
  };

  CashFlowSeries out;
  out.frequency = frequency;
  std::size_t i = 0;
  for (int block = 0; i < obs.size(); ++block) {
    const Date end = block_end(block);
    double sum = 0.0;
    double t_sum = 0.0;
    bool all_observed = true;
    std::size_t count = 0;
    const Date block_start = obs[i].date;
    for (; i < obs.size() && obs[i].date < end; ++i, ++count) {
      sum += obs[i].value;
      t_sum += obs[i].t;
      all_observed = all_observed && obs[i].observed;
    }
    if (count == 0) continue;
    out.observations.push_back({block_start, sum / static_cast<double>(count), all_observed,
                                t_sum / static_cast<double>(count)});
  }
  return out;
}

Eigen::Vector3d FitResult::scaled_estimate() const {
  return {estimate.k * kScaleK, estimate.nu * kScaleNu, estimate.beta0 * kScaleBeta0};
}

Eigen::Vector3d FitResult::scaled_std_errors() const {
  return {std_errors[0] * kScaleK, std_errors[1] * kScaleNu, std_errors[2] * kScaleBeta0};
}

FitResult fit(const CashFlowSeries& series, const FixedInputs& fixed, const FitOptions& options) {
  fixed.validate();
  const auto n = series.size();
  if (n <= 3 || n <= static_cast<std::size_t>(options.lags))
    throw InsufficientData("fit: too few observations for three parameters and the lag window");
  const Eigen::VectorXd times = series.times();
  const Eigen::VectorXd values = series.values();

  // The open upper bound on beta0 is kept just inside 1.
  const Bounds bounds{
      {std::log(options.k_lo), std::log(options.nu_lo), std::log(options.beta0_lo)},
      {std::log(options.k_hi), std::log(options.nu_hi), std::log(options.beta0_hi) - 1e-12}};

  const std::array<std::array<double, 2>, 4> pairs{{{1e-3, 1e-7}, {1e-2, 1e-6}, {1e-1, 1e-5}, {1.0, 1e-4}}};
  const std::array<double, 4> betas{0.001, 0.01, 0.05, 0.2};
  std::vector<std::future<Trial>> jobs;
  for (const auto& pair : pairs) {
    for (double beta : betas) {
      const Eigen::Vector3d y0(std::log(pair[0]), std::log(pair[1]), std::log(beta));
      jobs.push_back(std::async(std::launch::async, [&, y0] {
        return levenberg_marquardt(fixed, times, values, y0, bounds, options.max_iter);
      }));
    }
  }
  std::vector<Trial> trials;
  for (auto& job : jobs) trials.push_back(job.get());

  int best = -1;
  for (int i = 0; i < static_cast<int>(trials.size()); ++i)
    if (std::isfinite(trials[i].ssr) && (best < 0 || trials[i].ssr < trials[best].ssr)) best = i;
  if (best < 0) throw OptimizerDivergence("fit: no start produced a finite sum of squares");

  FitResult out;
  out.best_start = best;
  out.iterations = trials[best].iterations;
  out.estimate = from_log(trials[best].y);
  out.n_obs = n;
  out.ssr = trials[best].ssr;
  out.boundary_estimate = on_bound(out.estimate.k, options.k_lo, options.k_hi) ||
                          on_bound(out.estimate.nu, options.nu_lo, options.nu_hi) ||
                          on_bound(out.estimate.beta0, options.beta0_lo, options.beta0_hi);

  const Eigen::MatrixXd J = jacobian(fixed, out.estimate, times);
  Eigen::VectorXd residuals(times.size());
  for (Eigen::Index i = 0; i < times.size(); ++i)
    residuals[i] = values[i] - model_value(fixed, out.estimate, times[i]);
  out.covariance = newey_west(J, residuals, options.lags);
  for (int i = 0; i < 3; ++i) out.std_errors[i] = std::sqrt(std::max(0.0, out.covariance(i, i)));

  const double mean = values.mean();
  const double sst = (values.array() - mean).square().sum();
  const double nd = static_cast<double>(n);
  out.r2 = 1.0 - out.ssr / sst;
  out.adj_r2 = 1.0 - (out.ssr / (nd - 3.0)) / (sst / (nd - 1.0));
  out.f_statistic = ((sst - out.ssr) / 2.0) / (out.ssr / (nd - 3.0));

  cashflow::CashFlowParams params;
  params.u_eff = fixed.u_prime_hat;
  params.delta = fixed.delta_hat;
  params.k = out.estimate.k;
  params.theta = fixed.theta_bar;
  params.curve = equilibrium::ConversionCurveParams::single(out.estimate.beta0, 0.0, out.estimate.nu);
  try {
    out.lifespan_days = cashflow::curve_metrics(params).theoretical_lifespan;
  } catch (const NoPeak&) {
    out.lifespan_days = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

CashFlowSeries simulate_series(const FixedInputs& fixed, const ModelParams& truth, int n_days,
                               double noise_sigma, std::uint64_t seed, Date start) {
  fixed.validate();
  if (n_days < 1) throw DomainError("simulate_series: n_days must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw DomainError("simulate_series: noise sigma must be nonnegative");
  if (!(truth.k > 0.0 && truth.nu >= 0.0 && truth.beta0 > 0.0 && truth.beta0 < 1.0))
    throw DomainError("simulate_series: parameters out of range");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  CashFlowSeries out;
  for (int i = 0; i < n_days; ++i) {
    const double t = i + 1.0;
    double value = model_value(fixed, truth, t);
    if (noise_sigma > 0.0) value = std::max(0.0, value + noise_sigma * noise(rng));
    out.observations.push_back({start + std::chrono::days{i}, value, true, t});
  }
  return out;
}

}  // namespace storecycle::calibration

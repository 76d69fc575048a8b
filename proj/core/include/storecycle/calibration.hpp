#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace storecycle::calibration {

using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar date YYYY-MM-DD; throws InputError otherwise.
Date parse_date(const std::string& text);
std::string format_date(Date d);

enum class Frequency { Daily, Weekly, Monthly };

struct RawObservation {
  Date date;
  double value;
};

struct Observation {
  Date date;
  double value;
  bool observed = true;  // false for interpolated days
  double t = 1.0;        // model time; 1 on the first day
};

struct CashFlowSeries {
  std::vector<Observation> observations;
  Frequency frequency = Frequency::Daily;

  std::size_t size() const { return observations.size(); }
  Eigen::VectorXd times() const;
  Eigen::VectorXd values() const;
};

struct FixedInputs {
  double delta_hat = 1.535;
  double u_prime_hat = 1.0;
  double theta_bar = 1.0;

  void validate() const;
};

struct ModelParams {
  double k;
  double nu;
  double beta0;
};

/// h(t) = 2 pi u' theta / delta^2 (1 - (delta k t + 1) e^{-delta k t}) beta0 e^{-nu t^2}.
double model_value(const FixedInputs& fixed, const ModelParams& params, double t);

/// n x 3 matrix of dh/dk, dh/dnu, dh/dbeta0 at each time.
Eigen::MatrixXd jacobian(const FixedInputs& fixed, const ModelParams& params,
                         const Eigen::VectorXd& times);

/// T (J'J)^{-1} Omega (J'J)^{-1} with Bartlett weights 1 - l / (L + 1),
/// evaluated with fixed-order loops so results are reproducible bit for bit.
Eigen::Matrix3d newey_west(const Eigen::MatrixXd& J, const Eigen::VectorXd& residuals, int lags);

/// Gap-free daily series from raw observations. A missing day takes the mean
/// of the same weekday one week before and after, widening to two weeks; a
/// single available neighbour is used as is.
CashFlowSeries ingest(std::vector<RawObservation> raw);

/// Per-period means over blocks of 7 days or calendar months anchored at the
/// first date; t is the mean model time of each block.
CashFlowSeries aggregate(const CashFlowSeries& series, Frequency frequency);

struct FitOptions {
  int lags = 7;
  int max_iter = 500;
  /// Parameter bounds; the beta0 bounds are open.
  double k_lo = 1e-5, k_hi = 10.0;
  double nu_lo = 1e-9, nu_hi = 1e-2;
  double beta0_lo = 1e-6, beta0_hi = 1.0;
};

struct FitResult {
  ModelParams estimate{};
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  Eigen::Vector3d std_errors = Eigen::Vector3d::Zero();
  double ssr = 0.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double f_statistic = 0.0;
  std::size_t n_obs = 0;
  double lifespan_days = 0.0;
  bool boundary_estimate = false;
  int best_start = 0;
  int iterations = 0;

  /// Estimates at the reporting scales k x 10^2, nu x 10^6, beta0 x 10^2.
  Eigen::Vector3d scaled_estimate() const;
  Eigen::Vector3d scaled_std_errors() const;
};

constexpr double kScaleK = 1e2;
constexpr double kScaleNu = 1e6;
constexpr double kScaleBeta0 = 1e2;

/// Bounded Levenberg-Marquardt on the log parameters from 16 starts; the
/// lowest sum of squared residuals wins, ties going to the earlier start.
FitResult fit(const CashFlowSeries& series, const FixedInputs& fixed, const FitOptions& options = {});

/// h(t) + eps_t for t = 1..n_days with i.i.d. N(0, sigma^2) noise, clipped at 0.
CashFlowSeries simulate_series(const FixedInputs& fixed, const ModelParams& truth, int n_days,
                               double noise_sigma, std::uint64_t seed,
                               Date start = Date{std::chrono::year{2020} / 1 / 1});

}  // namespace storecycle::calibration

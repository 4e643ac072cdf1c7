#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "railpad/optimize.hpp"

namespace railpad {

/// GEV law with location mu, scale sigma, shape xi (xi != 0).
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = -0.1;

  void validate() const;
  /// 1 + xi (r - mu) / sigma > 0.
  bool in_support(double r) const { return 1.0 + xi * (r - mu) / sigma > 0.0; }
};

struct GaussianParams {
  double mean = 0.0;
  /// Population standard deviation.
  double sd = 1.0;
};

/// F(x) = 1 - exp(-((x - location) / scale)^shape), x > location.
struct Weibull3Params {
  double shape = 1.0;
  double scale = 1.0;
  double location = 0.0;
};

enum class DistributionFamily { Gev, Gaussian, Weibull3 };

std::string family_name(DistributionFamily family);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

struct FitReport {
  std::string location_id;
  DistributionFamily family = DistributionFamily::Gev;
  /// GEV: (xi, sigma, mu); Gaussian: (mean, sd); Weibull3: (shape, scale, location).
  std::vector<double> params;
  double log_likelihood = 0.0;
  double ks_statistic = 0.0;
  double ks_p_value = 1.0;
  std::optional<double> bootstrap_p_value;
  std::size_t n = 0;
};

namespace evd {

inline constexpr std::size_t kMinSamples = 20;
inline constexpr double kMinAbsXi = 1e-4;

double gev_pdf(double r, const GevParams& p);
double gev_cdf(double r, const GevParams& p);
double gev_quantile(double prob, const GevParams& p);
/// Log-likelihood in closed form; -infinity if any sample violates the support.
double gev_loglik(std::span<const double> data, const GevParams& p);
std::vector<double> gev_sample(std::size_t n, const GevParams& p, std::mt19937_64& rng);

/// Probability-weighted-moment estimate; throws EstimationError if the
/// moments do not yield a valid parameter set.
GevParams gev_pwm(std::span<const double> data);

struct GevFitOptions {
  optimize::NelderMeadOptions optimizer{};
  /// Shape is kept above this bound; the likelihood is unbounded below -1.
  double xi_lower = -1.0;
};

struct GevFit {
  GevParams params;
  double loglik = 0.0;
  GevParams initial;
  double initial_loglik = 0.0;
  /// Fewer than kMinSamples observations.
  bool low_confidence = false;
  int evaluations = 0;
};

/// Simplex maximization of the log-likelihood over (mu, ln sigma, xi)
/// started from the PWM estimate, the robust fallback, and any extra
/// starting points. Throws DegenerateInput for constant data and
/// EstimationError if no start converges.
GevFit fit_gev(std::span<const double> data, const GevFitOptions& options = {},
               std::span<const GevParams> extra_starts = {});

double normal_cdf(double x, const GaussianParams& p);
double normal_pdf(double x, const GaussianParams& p);
GaussianParams fit_gaussian_params(std::span<const double> data);

double weibull3_pdf(double x, const Weibull3Params& p);
double weibull3_cdf(double x, const Weibull3Params& p);
double weibull3_loglik(std::span<const double> data, const Weibull3Params& p);
std::vector<double> weibull3_sample(std::size_t n, const Weibull3Params& p, std::mt19937_64& rng);
/// Profile likelihood over the location (log-spaced offsets below the
/// minimum, then golden-section refinement); shape by root finding on the
/// score equation, scale in closed form.
Weibull3Params fit_weibull3_params(std::span<const double> data);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);
/// One-sample test; the p-value uses the asymptotic law of sqrt(N) D.
KsResult ks_test(std::span<const double> data, const std::function<double(double)>& cdf);

FitReport fit_gev_report(std::span<const double> data);
FitReport fit_gaussian(std::span<const double> data);
FitReport fit_weibull3(std::span<const double> data);
FitReport fit_report(std::span<const double> data, DistributionFamily family);

/// Parametric bootstrap p-value for the K-S statistic with refitting.
double bootstrap_ks_p_value(std::span<const double> data, DistributionFamily family, int replicates,
                            std::uint64_t seed);

/// Normalized sample autocorrelation for lags 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> residuals, std::size_t max_lag);

/// CSV `location_id,family,param1,param2,param3,log_likelihood,ks_statistic,ks_p_value,bootstrap_p_value,n`.
void write_fit_table(const std::filesystem::path& path, std::span<const FitReport> reports);

}  // namespace evd
}  // namespace railpad

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "railpad/evd.hpp"

namespace railpad {

struct DetectorSettings {
  /// Design false-alarm probability per window.
  double pfa = 0.083;
  int estimation_months = 1;
  int detection_months = 1;
  /// Windows with fewer residuals are indeterminate.
  std::size_t min_window = evd::kMinSamples;

  void validate() const;
};

struct DetectionReport {
  std::string window;
  std::string location_id;
  double g = 0.0;
  double threshold = 0.0;
  bool alarm = false;
  /// Alarm cleared after the previous determinate window alarmed.
  bool withdrawal = false;
  /// No decision (too few samples or MLE failure); history unchanged.
  bool indeterminate = false;
  std::size_t n_samples = 0;
  std::optional<GevParams> theta_hat;
  std::string message;
};

struct DetectorState {
  std::string location_id;
  std::string baseline_window;
  GevParams theta0;
  double alpha0g = 0.0;
  double gamma_g = 0.0;
  DetectorSettings settings;
  bool alarm_active = false;
  std::vector<DetectionReport> history;

  bool calibrated() const { return alpha0g > 0.0 && gamma_g > 0.0; }
};

namespace detect {

struct Calibration {
  double alpha0g = 0.0;
  double gamma_g = 0.0;
  std::size_t n_windows = 0;
};

inline constexpr std::size_t kMinCalibrationWindows = 6;

/// -ln(pfa) · alpha0g.
double threshold(double alpha0g, double pfa);

/// Exponential fit (mean) of H0 statistics and the resulting threshold.
Calibration calibrate(std::span<const double> h0_statistics, double pfa);

/// Windowed log-likelihood ratio written out term by term.
double glrt_terms(std::span<const double> window, const GevParams& theta_hat, const GevParams& theta0);

struct GlrtResult {
  double g = 0.0;
  /// l(theta_hat) - l(theta0), for cross-checking.
  double g_direct = 0.0;
  GevParams theta_hat;
  /// Some residual lies outside theta0's support; g is +infinity.
  bool outside_support = false;
};

/// Fits the window (theta0 is one of the starting points, so g >= 0) and
/// evaluates the statistic. Throws EstimationError if the MLE fails.
GlrtResult glrt_statistic(std::span<const double> window, const GevParams& theta0,
                          const evd::GevFitOptions& options = {});

/// theta0 from the estimation window; history cleared, not yet calibrated.
DetectorState initialize(std::string location_id, std::string baseline_window, std::span<const double> residuals,
                         const DetectorSettings& settings = {});
/// Sets alpha0g and gamma_g.
void apply_calibration(DetectorState& state, const Calibration& calibration);
/// Fresh baseline after a replacement; keeps the calibration.
void reinitialize(DetectorState& state, std::string baseline_window, std::span<const double> residuals);

/// Evaluates one detection window and advances the alarm state machine.
DetectionReport step(DetectorState& state, const std::string& window_label, std::span<const double> window);

/// Statistics of overlapping windows (length `window`, hop `stride`) over a
/// chronological residual sequence, against theta0. Failed fits are skipped.
std::vector<double> rolling_h0_statistics(std::span<const double> residuals, const GevParams& theta0,
                                          std::size_t window, std::size_t stride);

/// Monte Carlo (1 - pfa) quantile of g for iid windows of size n drawn
/// from theta0; the Neyman-Pearson route, kept only for comparison.
double iid_threshold(const GevParams& theta0, std::size_t n, double pfa, int replicates, std::uint64_t seed);

/// Monte Carlo fraction of windows of size n from theta1 with g > gamma.
double detection_probability(const GevParams& theta0, const GevParams& theta1, std::size_t n, double gamma,
                             int replicates, std::uint64_t seed);

void write_state(const std::filesystem::path& path, const DetectorState& state);
DetectorState read_state(const std::filesystem::path& path);

/// CSV `window,location_id,g,gamma_g,alarm,withdrawal,n_samples,mu_hat,sigma_hat,xi_hat`.
void write_detection_log(const std::filesystem::path& path, std::span<const DetectionReport> reports);
std::vector<DetectionReport> read_detection_log(const std::filesystem::path& path);

}  // namespace detect
}  // namespace railpad

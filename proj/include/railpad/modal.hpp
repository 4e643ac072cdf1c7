#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "railpad/emd.hpp"
#include "railpad/ingest.hpp"
#include "railpad/temperature.hpp"

namespace railpad {

/// Autonomous order-2 model x(k+1) = A x(k), y(k) = C x(k).
class StateSpaceModel {
 public:
  /// Throws EstimationError unless A has a complex-conjugate eigenvalue
  /// pair with spectral radius below `kMaxSpectralRadius`.
  StateSpaceModel(const Eigen::Matrix2d& a, const Eigen::RowVector2d& c, double fit_quality);

  static constexpr double kMaxSpectralRadius = 1.05;

  const Eigen::Matrix2d& a() const { return a_; }
  const Eigen::RowVector2d& c() const { return c_; }
  /// Normalized one-step prediction error.
  double fit_quality() const { return fit_quality_; }
  /// Eigenvalue with positive imaginary part.
  std::complex<double> lambda1() const;
  double spectral_radius() const { return std::abs(lambda1()); }

 private:
  Eigen::Matrix2d a_;
  Eigen::RowVector2d c_;
  double fit_quality_;
};

struct FrequencyEstimate {
  std::size_t train_index = 0;
  double value_hz = 0.0;
  std::vector<double> per_segment_hz;
  double mad_hz = 0.0;
  Timestamp timestamp{};
  double temp_c = 0.0;
  bool temp_clamped = false;
  std::string location_id;
  /// Number of segment estimates behind value_hz (kept when per-segment
  /// values are not, e.g. after reading an estimate log).
  std::size_t n_segments = 0;
};

namespace modal {

/// Output-only subspace identification: block-Hankel matrix, SVD truncated
/// to order 2, A from shift invariance of the extended observability
/// matrix, C from its first row.
StateSpaceModel identify_order2(std::span<const double> signal, double ts, std::size_t hankel_rows = 20);

/// |ln λ1| / (2π Ts).
double eigen_frequency(const StateSpaceModel& model, double ts);
double eigen_frequency(std::complex<double> lambda1, double ts);

struct EstimationOptions {
  ingest::PreprocessOptions preprocess;
  emd::EmdOptions emd;
  std::size_t hankel_rows = 20;
  double band_min_hz = 400.0;
  double band_max_hz = 650.0;
  double max_prediction_error = 0.9;
};

enum class SegmentStatus { Accepted, OutOfBand, PoorFit, Failed };

struct SegmentResult {
  std::size_t segment_index = 0;
  SegmentStatus status = SegmentStatus::Failed;
  double freq_hz = 0.0;
  double fit_quality = 0.0;
  std::string message;
};

/// Runs EMD and identification on every bogie segment of the passage.
std::vector<SegmentResult> analyze_segments(const PassageRecord& record, const EstimationOptions& options = {});

struct Aggregate {
  double value_hz = 0.0;
  double mad_hz = 0.0;
  std::vector<double> survivors;
};

/// Band filter followed by the median; throws EstimationError if nothing survives.
Aggregate aggregate_segments(std::span<const double> per_segment_hz, double band_min_hz, double band_max_hz);

/// Per-passage estimate: median over band-limited segment estimates, with
/// the nearest hourly temperature attached (clamped to [t_min, t_max]).
FrequencyEstimate estimate_passage(const PassageRecord& record, const TemperatureSeries& temps,
                                   const EstimationOptions& options = {}, std::size_t train_index = 0,
                                   double t_min = -5.0, double t_max = 30.0);

/// CSV `timestamp,location_id,freq_hz,mad_hz,temp_c,n_segments`.
void write_estimate_log(const std::filesystem::path& path, std::span<const FrequencyEstimate> estimates);
std::vector<FrequencyEstimate> read_estimate_log(const std::filesystem::path& path);

}  // namespace modal
}  // namespace railpad

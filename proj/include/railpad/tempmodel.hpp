#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "railpad/time.hpp"

namespace railpad {

struct FrequencyEstimate;

/// Continuous three-segment map from ambient temperature to the expected
/// second resonance frequency:
///
///   T <= b1       : level + s1 (T - b1)
///   b1 < T <= b2  : level + s2 (T - b1)          (s2 = 0 unless freed)
///   T > b2        : level + s2 (b2 - b1) + s3 (T - b2)
///
/// plus a per-location vertical offset. Temperatures are clamped to
/// [t_min, t_max] before evaluation.
struct TempFreqModel {
  double b1 = 0.0;
  double b2 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double level = 0.0;
  double y_offset = 0.0;
  double t_min = -5.0;
  double t_max = 30.0;
  double fit_rss = 0.0;
  std::size_t n_points = 0;

  /// Builds the continuous model from printed segment lines
  /// (slope/intercept of the outer segments and a flat middle level);
  /// breakpoints are placed where the lines meet the level.
  static TempFreqModel from_segment_lines(double s1, double intercept1, double level, double s3, double intercept3);

  /// Value without the location offset.
  double shape(double temp_c) const;
  /// shape(clamp(T)) + y_offset.
  double evaluate(double temp_c) const;
  bool in_range(double temp_c) const { return temp_c >= t_min && temp_c <= t_max; }

  /// Throws InvalidArgument unless b1 < b2 and the valid range is ordered.
  void validate() const;
};

/// Temperature-to-resonance relationship reported for the Danish turnout
/// (A2/A11 combined): -5.9 T + 597.8, 578.8, -5.3 T + 681.7.
TempFreqModel nominal_railpad_map();

struct TempFreqPoint {
  double temp_c = 0.0;
  double freq_hz = 0.0;
  std::size_t n = 0;
  double mad_hz = 0.0;
};

struct ResidualSequence {
  std::string location_id;
  std::vector<double> values;
  std::vector<Timestamp> timestamps;
  std::vector<double> temps_c;
  std::vector<std::string> months;

  std::size_t size() const { return values.size(); }
  /// Distinct month labels in chronological order.
  std::vector<std::string> month_labels() const;
  std::vector<double> window(const std::string& month) const;
};

namespace tempmodel {

struct BinOptions {
  std::size_t n_bins = 18;
  double t_min = -5.0;
  double t_max = 30.0;
};

/// One point per nonempty temperature bin: (mean member temperature,
/// median frequency). Temperatures outside the range land in the end bins.
std::vector<TempFreqPoint> bin_by_temperature(std::span<const FrequencyEstimate> estimates,
                                              const BinOptions& options = {});

struct FitOptions {
  bool free_middle_slope = false;
  double grid_step_c = 0.1;
  /// Breakpoints are searched between these percentiles of point temperatures.
  double lower_percentile = 0.10;
  double upper_percentile = 0.90;
  /// Minimum number of points strictly outside each breakpoint.
  std::size_t min_outer_points = 2;
};

struct PiecewiseFit {
  TempFreqModel model;
  /// Set when the middle segment is essentially empty or both outer
  /// slopes vanish; the data do not support a three-segment fit.
  bool degenerate = false;
};

PiecewiseFit fit_piecewise(std::span<const TempFreqPoint> points, const FitOptions& options = {});

/// Least-squares vertical shift of `model` onto the target location data.
TempFreqModel shift_to_location(const TempFreqModel& model, std::span<const FrequencyEstimate> target);

double evaluate(const TempFreqModel& model, double temp_c);

/// r_i = estimate_i - model(T_i), tagged with calendar month.
ResidualSequence residuals(std::span<const FrequencyEstimate> estimates, const TempFreqModel& model);

void write_model(const std::filesystem::path& path, const TempFreqModel& model);
TempFreqModel read_model(const std::filesystem::path& path);

void write_residual_csv(const std::filesystem::path& path, std::span<const ResidualSequence> sequences);
/// Groups rows by location, preserving file order.
std::vector<ResidualSequence> read_residual_csv(const std::filesystem::path& path);

}  // namespace tempmodel
}  // namespace railpad

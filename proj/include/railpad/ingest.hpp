#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "railpad/time.hpp"

namespace railpad {

inline constexpr double kDefaultSampleRateHz = 20000.0;

/// Header data of one train passage.
struct PassageMeta {
  std::string location_id;
  Timestamp timestamp{};
  std::string train_type;
  double speed_kmh = 0.0;
  double fs_hz = kDefaultSampleRateHz;
  std::vector<double> axle_loads_t;
  /// Simulator ground truth; absent for field data.
  std::optional<double> true_f2_hz;

  bool operator==(const PassageMeta&) const = default;
};

/// One train passage: vertical rail acceleration in g plus the raw wheel
/// detector pulse train (sample indices where WS(t) fires).
struct PassageRecord {
  PassageMeta meta;
  std::vector<double> accel_g;
  std::vector<std::size_t> wheel_pulse_samples;

  double duration_s() const;
  /// Raw detector times in seconds from record start (not yet synchronized).
  std::vector<double> wheel_times_s() const;
  /// Throws DataError if an invariant is violated.
  void validate() const;

  bool operator==(const PassageRecord&) const = default;
};

/// Normalized acceleration slice covering one bogie.
struct BogieSegment {
  std::vector<double> samples;
  std::size_t segment_index = 0;
  std::size_t train_index = 0;
  std::size_t start_sample = 0;
  double t0_s = 0.0;

  double peak() const;
};

struct ScreeningRule {
  std::string train_type = "IC3";
  double speed_min_kmh = 155.0;
  double speed_max_kmh = 160.0;
  /// Upper bound on the per-train coefficient of variation of axle loads;
  /// a negative value disables the check.
  double max_load_cov = 0.05;

  void validate() const;
  bool accepts(const PassageMeta& meta) const;
};

/// Passages of one location within one calendar month, ordered by time.
struct PassageGroup {
  std::string location_id;
  std::string month;  // YYYY-MM
  std::vector<PassageMeta> passages;
};

namespace ingest {

/// a / max|a|. Throws DegenerateInput on an all-zero signal.
std::vector<double> normalize(std::span<const double> accel);

/// Cascade of first/second order sections from a bilinear-transformed,
/// frequency-prewarped analogue Butterworth prototype.
class ButterworthLowpass {
 public:
  struct Section {
    double b0, b1, b2;
    double a1, a2;  // a0 == 1
  };

  ButterworthLowpass(double fs_hz, double cutoff_hz, int order = 3);

  /// Causal filtering from zero initial conditions.
  std::vector<double> apply(std::span<const double> x) const;
  /// |H(e^{j2πf/fs})| of the realized digital filter.
  double magnitude(double f_hz) const;

  const std::vector<Section>& sections() const { return sections_; }
  int order() const { return order_; }

 private:
  double fs_;
  int order_;
  std::vector<Section> sections_;
};

std::vector<double> lowpass(std::span<const double> accel, double fs_hz, double cutoff_hz = 1000.0, int order = 3);

/// Shifts detector times by the travel time distance/speed so that they
/// mark wheel arrival at the accelerometer.
std::vector<double> sync_wheel_detector(const PassageRecord& record, double detector_distance_m);

struct SliceOptions {
  /// Segment end = second wheel + fraction of the intra-bogie wheel interval.
  double end_margin_fraction = 0.5;
  /// Adjacent wheels closer than factor × median gap form a bogie.
  double pair_gap_factor = 1.5;
  std::size_t min_samples = 512;
};

/// Returns each (first, second) wheel index pair forming a bogie.
std::vector<std::pair<std::size_t, std::size_t>> pair_bogies(std::span<const double> wheel_times,
                                                             double pair_gap_factor = 1.5);

/// Slices `signal` into one segment per bogie. Segments shorter than
/// `min_samples` are dropped.
std::vector<BogieSegment> slice_bogies(std::span<const double> signal, double fs_hz,
                                       std::span<const double> wheel_times, const SliceOptions& options = {},
                                       std::size_t train_index = 0);

struct PreprocessOptions {
  double cutoff_hz = 1000.0;
  int filter_order = 3;
  double detector_distance_m = 5.0;
  SliceOptions slice;
};

struct PreprocessedPassage {
  std::vector<double> filtered;    // in g
  std::vector<double> normalized;  // filtered / max|filtered|
  std::vector<double> wheel_times_s;
  std::vector<BogieSegment> segments;  // slices of `normalized`
};

/// lowpass → normalize → synchronize → slice.
PreprocessedPassage preprocess(const PassageRecord& record, const PreprocessOptions& options = {},
                               std::size_t train_index = 0);

/// Mean of the per-bogie maxima.
double max_accel_stat(std::span<const double> per_bogie_max);
double max_accel_stat(std::span<const BogieSegment> segments);
/// Per-bogie maxima of the filtered (un-normalized) acceleration, in g.
double max_accel_stat(const PassageRecord& record, const PreprocessOptions& options = {});

/// Keeps passages accepted by `rule`, grouped by location and calendar
/// month. Output order is independent of input order.
std::vector<PassageGroup> screen_passages(std::span<const PassageMeta> passages, const ScreeningRule& rule);
std::vector<PassageGroup> screen_passages(std::span<const PassageRecord> records, const ScreeningRule& rule);

}  // namespace ingest
}  // namespace railpad

#include "railpad/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <tuple>

#include "railpad/error.hpp"
#include "railpad/stats.hpp"

namespace railpad {

double PassageRecord::duration_s() const {
  return static_cast<double>(accel_g.size()) / meta.fs_hz;
}

std::vector<double> PassageRecord::wheel_times_s() const {
  std::vector<double> t;
  t.reserve(wheel_pulse_samples.size());
  for (auto idx : wheel_pulse_samples) t.push_back(static_cast<double>(idx) / meta.fs_hz);
  return t;
}

void PassageRecord::validate() const {
  if (accel_g.empty()) throw DataError("passage record: empty acceleration");
  if (!(meta.fs_hz > 0.0)) throw DataError("passage record: sample rate must be positive");
  for (std::size_t i = 0; i < wheel_pulse_samples.size(); ++i) {
    if (wheel_pulse_samples[i] >= accel_g.size()) throw DataError("passage record: wheel pulse outside record");
    if (i > 0 && wheel_pulse_samples[i] <= wheel_pulse_samples[i - 1]) {
      throw DataError("passage record: wheel pulses must be strictly increasing");
    }
  }
}

double BogieSegment::peak() const {
  double m = 0.0;
  for (double v : samples) m = std::max(m, std::abs(v));
  return m;
}

void ScreeningRule::validate() const {
  if (!(speed_min_kmh < speed_max_kmh)) throw InvalidArgument("screening rule: speed_min must be below speed_max");
}

bool ScreeningRule::accepts(const PassageMeta& meta) const {
  if (meta.train_type != train_type) return false;
  if (meta.speed_kmh < speed_min_kmh || meta.speed_kmh > speed_max_kmh) return false;
  if (max_load_cov >= 0.0) {
    if (meta.axle_loads_t.empty()) return false;
    const double m = stats::mean(meta.axle_loads_t);
    if (!(m > 0.0)) return false;
    const double cov = std::sqrt(stats::variance(meta.axle_loads_t)) / m;
    if (cov > max_load_cov) return false;
  }
  return true;
}

namespace ingest {

std::vector<double> normalize(std::span<const double> accel) {
  if (accel.empty()) throw InvalidArgument("normalize: empty signal");
  double peak = 0.0;
  for (double v : accel) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw DegenerateInput("normalize: all-zero signal");
  std::vector<double> out(accel.begin(), accel.end());
  for (double& v : out) v /= peak;
  return out;
}

ButterworthLowpass::ButterworthLowpass(double fs_hz, double cutoff_hz, int order) : fs_(fs_hz), order_(order) {
  if (!(fs_hz > 0.0)) throw InvalidArgument("lowpass: sample rate must be positive");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= fs_hz / 2.0) throw InvalidArgument("lowpass: cutoff must lie in (0, Nyquist)");
  if (order < 1 || order > 12) throw InvalidArgument("lowpass: order must be in [1, 12]");

  const double k = std::tan(std::numbers::pi * cutoff_hz / fs_hz);
  const double k2 = k * k;
  // Conjugate pole pairs of the normalized prototype: s^2 + a s + 1.
  for (int i = 0; i < order / 2; ++i) {
    const double theta = std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order);
    const double a = 2.0 * std::sin(theta);
    const double a0 = 1.0 + a * k + k2;
    sections_.push_back({k2 / a0, 2.0 * k2 / a0, k2 / a0, (2.0 * k2 - 2.0) / a0, (1.0 - a * k + k2) / a0});
  }
  if (order % 2 == 1) {
    const double a0 = 1.0 + k;
    sections_.push_back({k / a0, k / a0, 0.0, (k - 1.0) / a0, 0.0});
  }
}

std::vector<double> ButterworthLowpass::apply(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections_) {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II state
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

double ButterworthLowpass::magnitude(double f_hz) const {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

std::vector<double> lowpass(std::span<const double> accel, double fs_hz, double cutoff_hz, int order) {
  return ButterworthLowpass(fs_hz, cutoff_hz, order).apply(accel);
}

std::vector<double> sync_wheel_detector(const PassageRecord& record, double detector_distance_m) {
  if (!(record.meta.speed_kmh > 0.0)) throw InvalidArgument("sync_wheel_detector: speed must be positive");
  const double tau = detector_distance_m / (record.meta.speed_kmh / 3.6);
  const double span = record.duration_s();
  auto times = record.wheel_times_s();
  for (double& t : times) {
    t += tau;
    if (t < 0.0 || t >= span) throw DataError("sync_wheel_detector: shifted wheel time outside record span");
  }
  return times;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_bogies(std::span<const double> wheel_times,
                                                             double pair_gap_factor) {
  if (wheel_times.size() < 2) throw InvalidArgument("slice_bogies: need at least two wheels");
  std::vector<double> gaps;
  for (std::size_t i = 1; i < wheel_times.size(); ++i) {
    const double g = wheel_times[i] - wheel_times[i - 1];
    if (!(g > 0.0)) throw InvalidArgument("slice_bogies: wheel times must be strictly increasing");
    gaps.push_back(g);
  }
  const double limit = pair_gap_factor * stats::median(gaps);
  std::vector<std::pair<std::size_t, std::size_t>> bogies;
  std::size_t i = 0;
  while (i < wheel_times.size()) {
    if (i + 1 < wheel_times.size() && gaps[i] < limit) {
      bogies.emplace_back(i, i + 1);
      i += 2;
    } else {
      throw DataError("slice_bogies: wheel " + std::to_string(i) + " cannot be paired into a bogie");
    }
  }
  return bogies;
}

std::vector<BogieSegment> slice_bogies(std::span<const double> signal, double fs_hz,
                                       std::span<const double> wheel_times, const SliceOptions& options,
                                       std::size_t train_index) {
  const auto bogies = pair_bogies(wheel_times, options.pair_gap_factor);
  std::vector<BogieSegment> out;
  for (std::size_t b = 0; b < bogies.size(); ++b) {
    const double t_first = wheel_times[bogies[b].first];
    const double t_second = wheel_times[bogies[b].second];
    double t_end = t_second + options.end_margin_fraction * (t_second - t_first);
    if (b + 1 < bogies.size()) t_end = std::min(t_end, wheel_times[bogies[b + 1].first]);
    const auto begin = static_cast<std::size_t>(std::llround(t_first * fs_hz));
    auto end = static_cast<std::size_t>(std::llround(t_end * fs_hz));
    end = std::min(end, signal.size());
    if (begin >= end || end - begin < options.min_samples) continue;
    BogieSegment seg;
    seg.samples.assign(signal.begin() + static_cast<std::ptrdiff_t>(begin),
                       signal.begin() + static_cast<std::ptrdiff_t>(end));
    seg.segment_index = b;
    seg.train_index = train_index;
    seg.start_sample = begin;
    seg.t0_s = static_cast<double>(begin) / fs_hz;
    out.push_back(std::move(seg));
  }
  return out;
}

PreprocessedPassage preprocess(const PassageRecord& record, const PreprocessOptions& options,
                               std::size_t train_index) {
  record.validate();
  PreprocessedPassage p;
  p.filtered = lowpass(record.accel_g, record.meta.fs_hz, options.cutoff_hz, options.filter_order);
  p.normalized = normalize(p.filtered);
  p.wheel_times_s = sync_wheel_detector(record, options.detector_distance_m);
  p.segments = slice_bogies(p.normalized, record.meta.fs_hz, p.wheel_times_s, options.slice, train_index);
  return p;
}

double max_accel_stat(std::span<const double> per_bogie_max) {
  if (per_bogie_max.empty()) throw InvalidArgument("max_accel_stat: no bogie segments");
  return stats::mean(per_bogie_max);
}

double max_accel_stat(std::span<const BogieSegment> segments) {
  std::vector<double> peaks;
  for (const auto& s : segments) peaks.push_back(s.peak());
  return max_accel_stat(peaks);
}

double max_accel_stat(const PassageRecord& record, const PreprocessOptions& options) {
  record.validate();
  const auto filtered = lowpass(record.accel_g, record.meta.fs_hz, options.cutoff_hz, options.filter_order);
  const auto times = sync_wheel_detector(record, options.detector_distance_m);
  const auto segments = slice_bogies(filtered, record.meta.fs_hz, times, options.slice);
  return max_accel_stat(segments);
}

namespace {

auto meta_key(const PassageMeta& m) {
  return std::tie(m.timestamp, m.train_type, m.speed_kmh, m.fs_hz, m.axle_loads_t, m.true_f2_hz);
}

}  // namespace

std::vector<PassageGroup> screen_passages(std::span<const PassageMeta> passages, const ScreeningRule& rule) {
  rule.validate();
  std::map<std::pair<std::string, std::string>, std::vector<PassageMeta>> groups;
  for (const auto& p : passages) {
    if (!rule.accepts(p)) continue;
    groups[{p.location_id, month_label(p.timestamp)}].push_back(p);
  }
  std::vector<PassageGroup> out;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const PassageMeta& a, const PassageMeta& b) { return meta_key(a) < meta_key(b); });
    out.push_back({key.first, key.second, std::move(members)});
  }
  return out;
}

std::vector<PassageGroup> screen_passages(std::span<const PassageRecord> records, const ScreeningRule& rule) {
  std::vector<PassageMeta> metas;
  metas.reserve(records.size());
  for (const auto& r : records) metas.push_back(r.meta);
  return screen_passages(metas, rule);
}

}  // namespace ingest
}  // namespace railpad

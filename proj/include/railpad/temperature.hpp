#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "railpad/time.hpp"

namespace railpad {

struct TemperatureSample {
  Timestamp time;
  double temp_c = 0.0;
};

/// Hourly ambient temperature record.
class TemperatureSeries {
 public:
  TemperatureSeries() = default;
  /// Throws InvalidArgument unless timestamps are strictly increasing.
  explicit TemperatureSeries(std::vector<TemperatureSample> samples);

  const std::vector<TemperatureSample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }

  /// True when `t` lies within half an hour of the recorded span.
  bool covers(Timestamp t) const;
  /// Temperature of the sample nearest in time; nullopt outside coverage.
  std::optional<double> nearest(Timestamp t) const;

  double min_temp() const;
  double max_temp() const;

 private:
  std::vector<TemperatureSample> samples_;
};

/// CSV with header `timestamp_iso8601,temp_c`.
TemperatureSeries read_temperature_csv(const std::filesystem::path& path);
void write_temperature_csv(const std::filesystem::path& path, const TemperatureSeries& series);

}  // namespace railpad

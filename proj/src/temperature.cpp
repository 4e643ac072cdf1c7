#include "railpad/temperature.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "railpad/error.hpp"
#include "railpad/text.hpp"

namespace railpad {

TemperatureSeries::TemperatureSeries(std::vector<TemperatureSample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (samples_[i].time <= samples_[i - 1].time) {
      throw InvalidArgument("temperature series: timestamps must be strictly increasing");
    }
  }
}

bool TemperatureSeries::covers(Timestamp t) const {
  if (samples_.empty()) return false;
  using std::chrono::minutes;
  return t >= samples_.front().time - minutes{30} && t <= samples_.back().time + minutes{30};
}

std::optional<double> TemperatureSeries::nearest(Timestamp t) const {
  if (!covers(t)) return std::nullopt;
  auto it = std::lower_bound(samples_.begin(), samples_.end(), t,
                             [](const TemperatureSample& s, Timestamp v) { return s.time < v; });
  if (it == samples_.end()) return samples_.back().temp_c;
  if (it == samples_.begin()) return it->temp_c;
  auto prev = std::prev(it);
  // ties go to the earlier sample
  return (t - prev->time <= it->time - t) ? prev->temp_c : it->temp_c;
}

double TemperatureSeries::min_temp() const {
  if (samples_.empty()) throw InvalidArgument("temperature series is empty");
  return std::min_element(samples_.begin(), samples_.end(),
                          [](auto& a, auto& b) { return a.temp_c < b.temp_c; })->temp_c;
}

double TemperatureSeries::max_temp() const {
  if (samples_.empty()) throw InvalidArgument("temperature series is empty");
  return std::max_element(samples_.begin(), samples_.end(),
                          [](auto& a, auto& b) { return a.temp_c < b.temp_c; })->temp_c;
}

TemperatureSeries read_temperature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open temperature file " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "timestamp_iso8601,temp_c") {
    throw DataError("temperature file " + path.string() + ": missing header 'timestamp_iso8601,temp_c'");
  }
  std::vector<TemperatureSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto fields = text::split(line, ',');
    if (fields.size() != 2) {
      throw DataError("temperature file line " + std::to_string(line_no) + ": expected 2 fields");
    }
    samples.push_back({parse_iso8601(fields[0]), text::parse_double(fields[1])});
  }
  try {
    return TemperatureSeries(std::move(samples));
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_temperature_csv(const std::filesystem::path& path, const TemperatureSeries& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write temperature file " + path.string());
  out << "timestamp_iso8601,temp_c\n";
  for (const auto& s : series.samples()) {
    out << format_iso8601(s.time) << ',' << text::format_double(s.temp_c) << '\n';
  }
}

}  // namespace railpad

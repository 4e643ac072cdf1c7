#include "railpad/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "railpad/error.hpp"

namespace railpad::stats {

namespace {
void require_nonempty(std::span<const double> x, const char* what) {
  if (x.empty()) throw InvalidArgument(std::string(what) + ": empty input");
}
}  // namespace

double mean(std::span<const double> x) {
  require_nonempty(x, "mean");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size());
}

double median(std::span<const double> x) {
  require_nonempty(x, "median");
  std::vector<double> v(x.begin(), x.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> x) {
  const double m = median(x);
  std::vector<double> dev;
  dev.reserve(x.size());
  for (double v : x) dev.push_back(std::abs(v - m));
  return median(dev);
}

double percentile(std::span<const double> x, double q) {
  require_nonempty(x, "percentile");
  if (q < 0.0 || q > 1.0) throw InvalidArgument("percentile: q outside [0,1]");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace railpad::stats

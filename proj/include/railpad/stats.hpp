#pragma once

#include <span>
#include <vector>

namespace railpad::stats {

double mean(std::span<const double> x);
/// Population variance (divides by N).
double variance(std::span<const double> x);
double median(std::span<const double> x);
/// Median absolute deviation around the median, unscaled.
double mad(std::span<const double> x);
/// Linear-interpolated percentile, `q` in [0, 1].
double percentile(std::span<const double> x, double q);

}  // namespace railpad::stats

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "railpad/ingest.hpp"

namespace railpad {

struct ImfSet {
  /// Ordered from highest to lowest local frequency.
  std::vector<std::vector<double>> imfs;
  std::vector<double> residue;
  std::vector<int> sift_counts;

  std::size_t size() const { return imfs.size(); }
  /// Σ imfs + residue.
  std::vector<double> reconstruct() const;
};

namespace emd {

struct EmdOptions {
  std::size_t max_imfs = 6;
  /// Cauchy-type stopping threshold Σ(h_{k-1}-h_k)² / Σh_{k-1}².
  double sd_threshold = 0.2;
  int max_sifts = 30;
  /// Extrema mirrored at each boundary before spline fitting.
  std::size_t mirror_extrema = 2;
  /// Adjacent maximum/minimum pairs whose height difference is below this
  /// fraction of the peak-to-peak range of the signal being sifted are left out of the
  /// envelopes (0 keeps every extremum).
  double min_swing_fraction = 0.005;
};

struct Extrema {
  std::vector<std::size_t> maxima;
  std::vector<std::size_t> minima;
};

Extrema find_extrema(std::span<const double> x);
std::size_t count_zero_crossings(std::span<const double> x);

/// Natural cubic spline through (knots_x, knots_y) evaluated at 0..n-1.
std::vector<double> cubic_spline(std::span<const double> knots_x, std::span<const double> knots_y, std::size_t n);

/// Deterministic EMD by cubic-spline envelope sifting.
/// Throws DegenerateInput if the input has fewer than two maxima or minima.
ImfSet decompose(std::span<const double> signal, const EmdOptions& options = {});
ImfSet decompose(const BogieSegment& segment, const EmdOptions& options = {});

/// IMF2; throws EstimationError if fewer than two IMFs were extracted.
const std::vector<double>& select_imf2(const ImfSet& set);

/// |#extrema - #zero crossings| ≤ 1 + slack_fraction·#extrema.
bool satisfies_imf_condition(std::span<const double> imf, double slack_fraction = 0.05);

/// One column per IMF followed by the residue.
void write_imf_csv(const std::filesystem::path& path, const ImfSet& set);

}  // namespace emd
}  // namespace railpad

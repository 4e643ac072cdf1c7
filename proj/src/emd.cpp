#include "railpad/emd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "railpad/error.hpp"
#include "railpad/text.hpp"

namespace railpad {

std::vector<double> ImfSet::reconstruct() const {
  std::vector<double> out = residue;
  for (const auto& imf : imfs) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += imf[i];
  }
  return out;
}

namespace emd {

Extrema find_extrema(std::span<const double> x) {
  Extrema e;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] >= x[i + 1]) {
      e.maxima.push_back(i);
    } else if (x[i] < x[i - 1] && x[i] <= x[i + 1]) {
      e.minima.push_back(i);
    }
  }
  return e;
}

std::size_t count_zero_crossings(std::span<const double> x) {
  std::size_t n = 0;
  double prev = 0.0;
  for (double v : x) {
    if (v == 0.0) continue;
    if (prev != 0.0 && ((prev < 0.0) != (v < 0.0))) ++n;
    prev = v;
  }
  return n;
}

std::vector<double> cubic_spline(std::span<const double> kx, std::span<const double> ky, std::size_t n) {
  const std::size_t m = kx.size();
  if (m != ky.size() || m < 2) throw InvalidArgument("cubic_spline: need at least two knots");
  std::vector<double> out(n);
  if (m == 2) {
    const double slope = (ky[1] - ky[0]) / (kx[1] - kx[0]);
    for (std::size_t i = 0; i < n; ++i) out[i] = ky[0] + slope * (static_cast<double>(i) - kx[0]);
    return out;
  }
  // Second derivatives with natural end conditions; Thomas algorithm.
  std::vector<double> h(m - 1), m2(m, 0.0), c(m, 0.0), d(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) h[i] = kx[i + 1] - kx[i];
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double a = h[i - 1];
    const double b = 2.0 * (h[i - 1] + h[i]);
    const double cc = h[i];
    const double rhs = 6.0 * ((ky[i + 1] - ky[i]) / h[i] - (ky[i] - ky[i - 1]) / h[i - 1]);
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (rhs - a * d[i - 1]) / denom;
  }
  for (std::size_t i = m - 2; i >= 1; --i) {
    m2[i] = d[i] - c[i] * m2[i + 1];
  }
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    while (seg + 2 < m && t > kx[seg + 1]) ++seg;
    const double hi = h[seg];
    const double a = (kx[seg + 1] - t) / hi;
    const double b = (t - kx[seg]) / hi;
    out[i] = a * ky[seg] + b * ky[seg + 1] +
             ((a * a * a - a) * m2[seg] + (b * b * b - b) * m2[seg + 1]) * (hi * hi) / 6.0;
  }
  return out;
}

namespace {

// Knots of one envelope, with `mirror` extrema reflected about each end.
void envelope_knots(std::span<const double> x, const std::vector<std::size_t>& idx, std::size_t mirror,
                    std::vector<double>& kx, std::vector<double>& ky) {
  kx.clear();
  ky.clear();
  const double last = static_cast<double>(x.size() - 1);
  const std::size_t nm = std::min(mirror, idx.size());
  for (std::size_t k = nm; k-- > 0;) {
    kx.push_back(-static_cast<double>(idx[k]));
    ky.push_back(x[idx[k]]);
  }
  for (auto i : idx) {
    kx.push_back(static_cast<double>(i));
    ky.push_back(x[i]);
  }
  for (std::size_t k = 0; k < nm; ++k) {
    const auto i = idx[idx.size() - 1 - k];
    kx.push_back(2.0 * last - static_cast<double>(i));
    ky.push_back(x[i]);
  }
}

// Drops adjacent max/min pairs with a swing below `threshold`.
Extrema prune_extrema(std::span<const double> x, const Extrema& e, double threshold) {
  if (!(threshold > 0.0)) return e;
  struct Point {
    std::size_t i;
    bool max;
  };
  std::vector<Point> pts;
  pts.reserve(e.maxima.size() + e.minima.size());
  std::size_t a = 0, b = 0;
  while (a < e.maxima.size() || b < e.minima.size()) {
    if (b == e.minima.size() || (a < e.maxima.size() && e.maxima[a] < e.minima[b])) {
      pts.push_back({e.maxima[a++], true});
    } else {
      pts.push_back({e.minima[b++], false});
    }
  }
  std::vector<Point> kept;
  kept.reserve(pts.size());
  for (const auto& p : pts) {
    if (!kept.empty() && kept.back().max == p.max) {
      // same kind twice in a row: keep the more extreme one
      const bool better = p.max ? x[p.i] > x[kept.back().i] : x[p.i] < x[kept.back().i];
      if (better) kept.back() = p;
      continue;
    }
    if (!kept.empty() && std::abs(x[p.i] - x[kept.back().i]) < threshold) {
      // a small wiggle: drop the pair unless it is the first extremum
      if (kept.size() >= 2) {
        kept.pop_back();
        continue;
      }
    }
    kept.push_back(p);
  }
  Extrema out;
  for (const auto& p : kept) (p.max ? out.maxima : out.minima).push_back(p.i);
  return out;
}

bool can_envelope(const Extrema& e) { return e.maxima.size() >= 2 && e.minima.size() >= 2; }

}  // namespace

ImfSet decompose(std::span<const double> signal, const EmdOptions& options) {
  if (signal.size() < 8) throw InvalidArgument("emd: signal shorter than 8 samples");
  if (options.max_imfs < 2) throw InvalidArgument("emd: max_imfs must be at least 2");
  if (!can_envelope(find_extrema(signal))) {
    throw DegenerateInput("emd: fewer than two maxima or minima, cannot build envelopes");
  }

  const std::size_t n = signal.size();
  ImfSet set;
  std::vector<double> residue(signal.begin(), signal.end());
  std::vector<double> kx, ky;
  const auto swing_of = [&](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return options.min_swing_fraction * (*hi - *lo);
  };

  while (set.imfs.size() < options.max_imfs) {
    const auto ext = prune_extrema(residue, find_extrema(residue), swing_of(residue));
    if (ext.maxima.size() + ext.minima.size() < 3 || !can_envelope(ext)) break;

    std::vector<double> h = residue;
    int sifts = 0;
    for (; sifts < options.max_sifts;) {
      const auto e = prune_extrema(h, find_extrema(h), swing_of(h));
      if (!can_envelope(e)) break;
      envelope_knots(h, e.maxima, options.mirror_extrema, kx, ky);
      const auto upper = cubic_spline(kx, ky, n);
      envelope_knots(h, e.minima, options.mirror_extrema, kx, ky);
      const auto lower = cubic_spline(kx, ky, n);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double mean = 0.5 * (upper[i] + lower[i]);
        num += mean * mean;
        den += h[i] * h[i];
        h[i] -= mean;
      }
      ++sifts;
      if (den == 0.0 || (num / den < options.sd_threshold && satisfies_imf_condition(h))) break;
    }

    for (std::size_t i = 0; i < n; ++i) residue[i] -= h[i];
    set.imfs.push_back(std::move(h));
    set.sift_counts.push_back(sifts);
  }
  set.residue = std::move(residue);
  return set;
}

ImfSet decompose(const BogieSegment& segment, const EmdOptions& options) {
  return decompose(std::span<const double>(segment.samples), options);
}

const std::vector<double>& select_imf2(const ImfSet& set) {
  if (set.imfs.size() < 2) throw EstimationError("emd: fewer than two IMFs extracted");
  return set.imfs[1];
}

bool satisfies_imf_condition(std::span<const double> imf, double slack_fraction) {
  const auto e = find_extrema(imf);
  const auto extrema = static_cast<double>(e.maxima.size() + e.minima.size());
  const auto crossings = static_cast<double>(count_zero_crossings(imf));
  return std::abs(extrema - crossings) <= 1.0 + slack_fraction * extrema;
}

void write_imf_csv(const std::filesystem::path& path, const ImfSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t k = 0; k < set.imfs.size(); ++k) out << "imf" << (k + 1) << ',';
  out << "residue\n";
  for (std::size_t i = 0; i < set.residue.size(); ++i) {
    for (const auto& imf : set.imfs) out << text::format_double(imf[i]) << ',';
    out << text::format_double(set.residue[i]) << '\n';
  }
}

}  // namespace emd
}  // namespace railpad

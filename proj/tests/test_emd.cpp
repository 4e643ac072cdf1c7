#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "railpad/emd.hpp"
#include "railpad/error.hpp"
#include "railpad/ingest.hpp"
#include "railpad/sim.hpp"

using namespace railpad;

namespace {

constexpr double kFs = 20000.0;

std::vector<double> tone(double f, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = amp * std::sin(2.0 * std::numbers::pi * f * k / kFs + phase);
  return x;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double energy(std::span<const double> x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

// Frequency from the zero-crossing rate over the central half.
double crossing_frequency(std::span<const double> x) {
  const std::size_t lo = x.size() / 4, hi = 3 * x.size() / 4;
  return static_cast<double>(emd::count_zero_crossings(x.subspan(lo, hi - lo))) / 2.0 /
         (static_cast<double>(hi - lo) / kFs);
}

// Frequency of the largest DFT magnitude in [lo_hz, hi_hz]: 1 Hz scan, then 0.02 Hz refinement.
double dft_peak(std::span<const double> x, double lo_hz, double hi_hz) {
  const auto power = [&](double f) {
    double re = 0, im = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      re += x[k] * std::cos(2.0 * std::numbers::pi * f * k / kFs);
      im -= x[k] * std::sin(2.0 * std::numbers::pi * f * k / kFs);
    }
    return re * re + im * im;
  };
  const auto scan = [&](double a, double b, double step) {
    double best_f = a, best = -1;
    for (double f = a; f <= b; f += step) {
      const double p = power(f);
      if (p > best) {
        best = p;
        best_f = f;
      }
    }
    return best_f;
  };
  const double coarse = scan(lo_hz, hi_hz, 1.0);
  return scan(coarse - 1.0, coarse + 1.0, 0.02);
}

double relative_reconstruction_error(std::span<const double> x, const ImfSet& set) {
  const auto r = set.reconstruct();
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) num += (x[i] - r[i]) * (x[i] - r[i]);
  return std::sqrt(num / energy(x));
}

}  // namespace

TEST(Emd, SingleToneGoesToFirstImf) {
  const auto x = tone(500.0, 2000);
  const auto set = emd::decompose(x);
  ASSERT_GE(set.size(), 1u);
  EXPECT_GT(correlation(set.imfs[0], x), 0.99);
  EXPECT_LT(energy(set.residue), 0.01 * energy(x));
}

TEST(Emd, TwoToneSeparation) {
  const auto hi = tone(550.0, 4000);
  const auto lo = tone(80.0, 4000, 1.0, 0.3);
  std::vector<double> x(hi.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = hi[i] + lo[i];
  const auto set = emd::decompose(x);
  ASSERT_GE(set.size(), 2u);
  EXPECT_GT(correlation(set.imfs[0], hi), 0.95);
  EXPECT_GT(correlation(emd::select_imf2(set), lo), 0.95);
}

TEST(Emd, ReconstructionIdentityOnSimulatedSegments) {
  const sim::TrackConfig track;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rec = sim::synth_passage(track, sim::TrainConfig{}, 2.0 + 5.0 * seed, 0.0, seed);
    for (const auto& seg : ingest::preprocess(rec).segments) {
      const auto set = emd::decompose(seg);
      EXPECT_LT(relative_reconstruction_error(seg.samples, set), 1e-10);
      for (const auto& imf : set.imfs) EXPECT_TRUE(emd::satisfies_imf_condition(imf));
      for (int c : set.sift_counts) {
        EXPECT_GE(c, 1);
        EXPECT_LE(c, 30);
      }
    }
  }
}

TEST(Emd, OrderedFromHighToLowFrequency) {
  std::vector<double> x(6000);
  const auto a = tone(900.0, x.size()), b = tone(240.0, x.size(), 1.0, 0.7), c = tone(40.0, x.size(), 1.0, 0.2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a[i] + b[i] + c[i];
  const auto set = emd::decompose(x);
  ASSERT_GE(set.size(), 3u);
  EXPECT_GT(crossing_frequency(set.imfs[0]), crossing_frequency(set.imfs[1]));
  EXPECT_GT(crossing_frequency(set.imfs[1]), crossing_frequency(set.imfs[2]));
}

TEST(Emd, ConstantAndShortInputsRejected) {
  EXPECT_THROW(emd::decompose(std::vector<double>(100, 1.0)), DegenerateInput);
  EXPECT_THROW(emd::decompose(std::vector<double>{1, -1, 1}), InvalidArgument);
  emd::EmdOptions opt;
  opt.max_imfs = 1;
  EXPECT_THROW(emd::decompose(tone(500.0, 500), opt), InvalidArgument);
}

TEST(Emd, RespectsMaxImfs) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(3000);
  for (double& v : x) v = g(rng);
  emd::EmdOptions opt;
  opt.max_imfs = 3;
  const auto set = emd::decompose(x, opt);
  EXPECT_LE(set.size(), 3u);
  EXPECT_LT(relative_reconstruction_error(x, set), 1e-10);
}

TEST(Emd, SelectImf2) {
  ImfSet set;
  for (int i = 0; i < 4; ++i) set.imfs.push_back(std::vector<double>(3, static_cast<double>(i)));
  EXPECT_EQ(emd::select_imf2(set), std::vector<double>(3, 1.0));
  set.imfs.resize(1);
  EXPECT_THROW(emd::select_imf2(set), EstimationError);
}

TEST(Emd, SimulatedImf2LiesInRailpadBand) {
  sim::TrackConfig track;
  track.f2_map.y_offset = 550.0 - 578.8;
  const auto rec = sim::synth_passage(track, sim::TrainConfig{}, 10.0, 0.0, 4);
  const auto p = ingest::preprocess(rec);
  for (const auto& seg : p.segments) {
    const auto imf2 = emd::select_imf2(emd::decompose(seg));
    // DFT peak over 50-2000 Hz
    const std::size_t n = imf2.size();
    double best_f = 0, best = -1;
    for (double f = 50.0; f <= 2000.0; f += 2.0) {
      double re = 0, im = 0;
      for (std::size_t k = 0; k < n; ++k) {
        re += imf2[k] * std::cos(2.0 * std::numbers::pi * f * k / kFs);
        im -= imf2[k] * std::sin(2.0 * std::numbers::pi * f * k / kFs);
      }
      if (re * re + im * im > best) {
        best = re * re + im * im;
        best_f = f;
      }
    }
    EXPECT_GE(best_f, 400.0);
    EXPECT_LE(best_f, 650.0);
  }
}

TEST(Emd, Imf2RobustToSmallNoise) {
  const auto hi = tone(550.0, 8000);
  const auto lo = tone(80.0, 8000, 1.0, 0.3);
  std::vector<double> clean(hi.size()), noisy(hi.size());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.01);  // -40 dB
  for (std::size_t i = 0; i < clean.size(); ++i) {
    clean[i] = hi[i] + lo[i];
    noisy[i] = clean[i] + g(rng);
  }
  const double f_clean = dft_peak(emd::select_imf2(emd::decompose(clean)), 20.0, 1000.0);
  const double f_noisy = dft_peak(emd::select_imf2(emd::decompose(noisy)), 20.0, 1000.0);
  EXPECT_NEAR(f_clean, 80.0, 1.0);
  EXPECT_NEAR(f_noisy, f_clean, 0.01 * f_clean);
}

TEST(Emd, Deterministic) {
  const auto rec = sim::synth_passage(sim::TrackConfig{}, sim::TrainConfig{}, 4.0, 0.0, 9);
  const auto seg = ingest::preprocess(rec).segments.front();
  const auto a = emd::decompose(seg), b = emd::decompose(seg);
  EXPECT_EQ(a.imfs, b.imfs);
  EXPECT_EQ(a.residue, b.residue);
}

TEST(Emd, SplineReproducesLinearData) {
  const std::vector<double> kx = {0, 7, 20, 33, 49};
  std::vector<double> ky;
  for (double x : kx) ky.push_back(2.0 - 0.5 * x);
  const auto s = emd::cubic_spline(kx, ky, 50);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], 2.0 - 0.5 * static_cast<double>(i), 1e-12);
}

TEST(Emd, ExtremaAndCrossings) {
  const std::vector<double> x = {0, 1, 0, -1, 0, 1, 0, -1, 0};
  const auto e = emd::find_extrema(x);
  EXPECT_EQ(e.maxima, (std::vector<std::size_t>{1, 5}));
  EXPECT_EQ(e.minima, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(emd::count_zero_crossings(std::vector<double>{1, -1, 1, -1}), 3u);
}

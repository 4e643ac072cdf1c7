#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "railpad/error.hpp"
#include "railpad/sim.hpp"

using namespace railpad;

namespace {

sim::TrackConfig quiet_track() {
  sim::TrackConfig t;
  t.noise_std = 0.0;
  t.scatter_sigma_hz = 0.0;
  return t;
}

Timestamp ts(const char* s) { return parse_iso8601(s); }

TemperatureSeries constant_temps(int months, double temp) {
  std::vector<TemperatureSample> s;
  const Timestamp t0 = ts("2017-09-01T00:00:00Z");
  for (Timestamp t = t0; t < add_months(t0, months); t += std::chrono::hours(1)) s.push_back({t, temp});
  return TemperatureSeries(s);
}

}  // namespace

TEST(SimTemperature, RangeClampHourlySpanAndDeterminism) {
  const auto a = sim::synth_temperature(12, 5);
  EXPECT_GE(a.min_temp(), -5.0);
  EXPECT_LE(a.max_temp(), 30.0);
  EXPECT_EQ(a.size(), 365u * 24u);  // Sep 2017 .. Aug 2018
  for (std::size_t i = 1; i < a.size(); ++i) {
    ASSERT_EQ(a.samples()[i].time - a.samples()[i - 1].time, std::chrono::hours(1));
  }
  const auto b = sim::synth_temperature(18, 9);
  const auto c = sim::synth_temperature(18, 9);
  ASSERT_EQ(b.size(), c.size());
  for (std::size_t i = 0; i < b.size(); ++i) ASSERT_EQ(b.samples()[i].temp_c, c.samples()[i].temp_c);
  EXPECT_THROW(sim::synth_temperature(0, 1), InvalidArgument);
}

TEST(SimTrack, DefaultsSatisfyInvariants) {
  const sim::TrackConfig t;
  EXPECT_NO_THROW(t.validate());
  for (double T = -5.0; T <= 30.0; T += 0.25) {
    const double f = sim::healthy_f2(t, T);
    EXPECT_GE(f, 400.0);
    EXPECT_LE(f, 650.0);
    EXPECT_LT(t.f1_hz, 400.0);
  }
  sim::TrackConfig bad = t;
  bad.zeta2 = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = t;
  bad.zeta1 = 1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(SimPassage, TrueF2FollowsPrintedMap) {
  const auto track = quiet_track();
  const sim::TrainConfig train;
  EXPECT_NEAR(*sim::synth_passage(track, train, 10.0, 0.0, 1).meta.true_f2_hz, 578.8, 1e-9);
  EXPECT_NEAR(*sim::synth_passage(track, train, 0.0, 0.0, 1).meta.true_f2_hz, 597.8, 1e-9);
  EXPECT_NEAR(*sim::synth_passage(track, train, 25.0, 0.0, 1).meta.true_f2_hz, 681.7 - 5.3 * 25.0, 1e-9);
  EXPECT_NEAR(*sim::synth_passage(track, train, 10.0, 12.5, 1).meta.true_f2_hz, 578.8 - 12.5, 1e-9);
  EXPECT_THROW(sim::synth_passage(track, train, 10.0, 600.0, 1), InvalidArgument);
}

TEST(SimPassage, ClosedFormSingleBogieSingleMode) {
  auto track = quiet_track();
  track.mode_amplitude_ratio = 0.0;
  track.hf_amplitude_ratio = 0.0;
  sim::TrainConfig train;
  train.bogie_positions_m = {2.0};
  train.axle_load_std_t = 0.0;
  sim::RecordOptions opt;
  const auto rec = sim::synth_passage(track, train, 10.0, 0.0, 3, opt);
  ASSERT_EQ(rec.wheel_pulse_samples.size(), 2u);

  const double fs = opt.fs_hz;
  const double v = train.speed_kmh / 3.6;
  const double tau = opt.detector_distance_m / v;
  const double f = 578.8;
  const double wn = 2.0 * std::numbers::pi * f;
  const double wd = wn * std::sqrt(1.0 - track.zeta2 * track.zeta2);
  double peak = 0.0;
  for (double a : rec.accel_g) peak = std::max(peak, std::abs(a));
  for (std::size_t k = 0; k < rec.accel_g.size(); ++k) {
    double expect = 0.0;
    for (double pos : {2.0, 2.0 + train.axle_spacing_m}) {
      const double t0 = opt.pre_trigger_s + pos / v + tau;
      const double t = static_cast<double>(k) / fs - t0;
      if (t >= 0.0) expect += track.amplitude_g * std::exp(-track.zeta2 * wn * t) * std::sin(wd * t);
    }
    ASSERT_NEAR(rec.accel_g[k], expect, 1e-9 * peak) << "sample " << k;
  }
  // the two bursts are separated by axle spacing / speed
  const double gap = static_cast<double>(rec.wheel_pulse_samples[1] - rec.wheel_pulse_samples[0]) / fs;
  EXPECT_NEAR(gap, train.axle_spacing_m / v, 1.0 / fs);
}

TEST(SimPassage, SpectralPeakAtConfiguredFrequency) {
  auto track = quiet_track();
  track.mode_amplitude_ratio = 0.0;
  track.hf_amplitude_ratio = 0.0;
  sim::TrainConfig train;
  train.bogie_positions_m = {2.0};
  const auto rec = sim::synth_passage(track, train, 10.0, 0.0, 3);
  const double fs = rec.meta.fs_hz;
  const std::size_t n = rec.accel_g.size();
  const double bin = fs / static_cast<double>(n);
  std::size_t best = 0;
  double best_mag = -1.0;
  for (auto k = static_cast<std::size_t>(300.0 / bin); k < static_cast<std::size_t>(900.0 / bin); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += rec.accel_g[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * j % n) / n);
    }
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  // two axles: the damped-sine spectrum times the |1 + exp(-i w d)| comb
  const double a = track.zeta2 * 2.0 * std::numbers::pi * 578.8;
  const double wd = 2.0 * std::numbers::pi * 578.8 * std::sqrt(1.0 - track.zeta2 * track.zeta2);
  const double gap = train.axle_spacing_m / (train.speed_kmh / 3.6);
  double expect = 0.0, expect_mag = -1.0;
  for (double f = 300.0; f < 900.0; f += 0.01) {
    const double w = 2.0 * std::numbers::pi * f;
    const std::complex<double> s(a, w);
    const double mag = std::abs(wd / (s * s + wd * wd)) * std::abs(1.0 + std::polar(1.0, -w * gap));
    if (mag > expect_mag) {
      expect_mag = mag;
      expect = f;
    }
  }
  EXPECT_LE(std::abs(static_cast<double>(best) * bin - expect), bin) << "oracle peak " << expect;
}

TEST(SimPassage, DeterministicUnderSeed) {
  const sim::TrackConfig track;
  const sim::TrainConfig train;
  const auto a = sim::synth_passage(track, train, 4.0, 0.0, 77);
  const auto b = sim::synth_passage(track, train, 4.0, 0.0, 77);
  const auto c = sim::synth_passage(track, train, 4.0, 0.0, 78);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.accel_g, c.accel_g);
}

TEST(SimPassage, WheelPulsesInsideRecord) {
  const sim::TrackConfig track;
  const auto rec = sim::synth_passage(track, sim::TrainConfig{}, 4.0, 0.0, 5);
  EXPECT_NO_THROW(rec.validate());
  EXPECT_EQ(rec.wheel_pulse_samples.size(), 8u);
  EXPECT_EQ(rec.meta.axle_loads_t.size(), 8u);
}

TEST(SimCampaign, CountsAndOrdering) {
  const auto track = quiet_track();
  const auto temps = sim::synth_temperature(18, 2);
  const auto plans = sim::plan_campaign(track, sim::TrainConfig{}, sim::DegradationSchedule{}, temps, 100, 4);
  EXPECT_EQ(plans.size(), 1800u);
  for (std::size_t i = 1; i < plans.size(); ++i) ASSERT_LE(plans[i - 1].timestamp, plans[i].timestamp);
  for (const auto& p : plans) {
    ASSERT_EQ(p.degradation_offset_hz, 0.0);
    ASSERT_EQ(p.temp_c, *temps.nearest(p.timestamp));
  }
  EXPECT_THROW(sim::plan_campaign(track, sim::TrainConfig{}, {}, TemperatureSeries{}, 100, 4), InvalidArgument);
  EXPECT_THROW(sim::plan_campaign(track, sim::TrainConfig{}, {}, temps, 0, 4), InvalidArgument);
}

TEST(SimCampaign, HealthyRecordsMatchMap) {
  const auto track = quiet_track();
  const auto temps = sim::synth_temperature(2, 3);
  const auto recs = sim::synth_campaign(track, sim::TrainConfig{}, {}, temps, 5, 8);
  ASSERT_EQ(recs.size(), 10u);
  for (const auto& r : recs) {
    EXPECT_NEAR(*r.meta.true_f2_hz, sim::healthy_f2(track, *temps.nearest(r.meta.timestamp)), 1e-9);
  }
}

TEST(SimCampaign, DegradationScheduleArithmetic) {
  const auto track = quiet_track();
  const auto temps = sim::synth_temperature(18, 2);
  sim::DegradationSchedule sched;
  sched.onset = ts("2018-04-01T00:00:00Z");  // month 8
  sched.ramp_months = 1.0;
  sched.f2_drop_fraction = 0.05;
  const auto plans = sim::plan_campaign(track, sim::TrainConfig{}, sched, temps, 30, 4);
  const Timestamp after = ts("2018-05-02T12:00:00Z");
  for (const auto& p : plans) {
    const double healthy = sim::healthy_f2(track, p.temp_c);
    if (p.timestamp < sched.onset) {
      EXPECT_EQ(p.degradation_offset_hz, 0.0);
    } else if (p.timestamp >= after) {
      EXPECT_NEAR(healthy - p.degradation_offset_hz, 0.95 * healthy, 1e-9);
    } else {
      EXPECT_GE(p.degradation_offset_hz, 0.0);
      EXPECT_LE(p.degradation_offset_hz, 0.05 * healthy + 1e-9);
    }
  }
  EXPECT_DOUBLE_EQ(sched.progress(sched.onset - std::chrono::seconds(1)), 0.0);
  EXPECT_DOUBLE_EQ(sched.progress(after), 1.0);
  sim::DegradationSchedule bad;
  bad.f2_drop_fraction = 1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(SimCampaign, TrueF2NonincreasingAtFixedTemperature) {
  const auto track = quiet_track();
  const auto temps = constant_temps(6, 12.0);
  sim::DegradationSchedule sched;
  sched.onset = ts("2017-11-10T00:00:00Z");
  sched.ramp_months = 2.5;
  sched.f2_drop_fraction = 0.08;
  const auto plans = sim::plan_campaign(track, sim::TrainConfig{}, sched, temps, 40, 6);
  double prev = INFINITY;
  for (const auto& p : plans) {
    const double f2 = sim::healthy_f2(track, p.temp_c) - p.degradation_offset_hz;
    ASSERT_LE(f2, prev + 1e-12);
    prev = f2;
  }
}

TEST(SimCampaign, FreightShareIsPlanted) {
  const auto temps = sim::synth_temperature(3, 1);
  sim::CampaignOptions opt;
  opt.freight_fraction = 0.1;
  const auto plans = sim::plan_campaign(sim::TrackConfig{}, sim::TrainConfig{}, {}, temps, 50, 2, opt);
  std::size_t freight = 0;
  for (const auto& p : plans) freight += p.train.train_type != "IC3";
  EXPECT_EQ(plans.size(), 165u);
  EXPECT_EQ(freight, 15u);
}

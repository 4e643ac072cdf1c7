#include "railpad/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "railpad/error.hpp"

namespace railpad::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSecondsPerMonth = 30.436875 * 86400.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Adds amp·exp(-ζωn τ)·sin(ωd τ), τ = t - t0 ≥ 0, to `acc`.
void add_damped_sine(std::vector<double>& acc, double fs, double t0, double fn, double zeta, double amp) {
  if (amp == 0.0) return;
  const double wn = kTwoPi * fn;
  const double sigma = zeta * wn;
  const double wd = wn * std::sqrt(1.0 - zeta * zeta);
  const auto k0 = static_cast<std::size_t>(std::ceil(t0 * fs));
  if (k0 >= acc.size()) return;
  const std::complex<double> pole(-sigma, wd);
  std::complex<double> z = amp * std::exp(pole * (static_cast<double>(k0) / fs - t0));
  const std::complex<double> step = std::exp(pole / fs);
  const double floor = 1e-12 * std::abs(amp);
  for (std::size_t k = k0; k < acc.size(); ++k) {
    acc[k] += z.imag();
    z *= step;
    if (std::abs(z) < floor) break;
  }
}

// Adds amp·exp(-(t - tc)²/(2 w²))·sin(2π f t) over tc ± 4w.
void add_windowed_tone(std::vector<double>& acc, double fs, double tc, double f, double width, double amp) {
  if (amp == 0.0) return;
  const double lo = std::max(0.0, std::ceil((tc - 4.0 * width) * fs));
  const double hi = std::min(static_cast<double>(acc.size()), std::floor((tc + 4.0 * width) * fs) + 1.0);
  for (auto k = static_cast<std::size_t>(lo); static_cast<double>(k) < hi; ++k) {
    const double t = static_cast<double>(k) / fs;
    const double u = (t - tc) / width;
    acc[k] += amp * std::exp(-0.5 * u * u) * std::sin(kTwoPi * f * t);
  }
}

}  // namespace

void TrackConfig::validate() const {
  if (!(zeta1 > 0.0 && zeta1 < 1.0) || !(zeta2 > 0.0 && zeta2 < 1.0)) {
    throw InvalidArgument("track config: damping ratios must lie in (0, 1)");
  }
  if (!(f1_hz > 0.0) || !(hf_hz > 0.0)) throw InvalidArgument("track config: modal frequencies must be positive");
  if (mode_amplitude_ratio < 0.0 || hf_amplitude_ratio < 0.0) {
    throw InvalidArgument("track config: amplitude ratios must be nonnegative");
  }
  if (!(hf_envelope_s > 0.0)) throw InvalidArgument("track config: rail vibration envelope must be positive");
  if (noise_std < 0.0) throw InvalidArgument("track config: noise_std must be nonnegative");
  if (scatter_sigma_hz < 0.0) throw InvalidArgument("track config: scatter scale must be nonnegative");
  f2_map.validate();
}

double noise_std_for_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 20.0); }

void TrainConfig::validate() const {
  if (!(speed_kmh > 0.0)) throw InvalidArgument("train config: speed must be positive");
  if (bogie_positions_m.empty()) throw InvalidArgument("train config: no bogies");
  for (std::size_t i = 1; i < bogie_positions_m.size(); ++i) {
    if (!(bogie_positions_m[i] > bogie_positions_m[i - 1] + axle_spacing_m)) {
      throw InvalidArgument("train config: bogie positions must be strictly increasing and not overlap");
    }
  }
  if (!(axle_spacing_m > 0.0)) throw InvalidArgument("train config: axle spacing must be positive");
  if (!(axle_load_mean_t > 0.0) || axle_load_std_t < 0.0) throw InvalidArgument("train config: bad axle loads");
}

TrainConfig freight_train() {
  TrainConfig t;
  t.train_type = "FREIGHT";
  t.bogie_positions_m = {2.5, 12.0, 20.0, 33.0, 41.0, 54.0, 62.0, 75.0};
  t.axle_spacing_m = 1.8;
  t.speed_kmh = 90.0;
  t.axle_load_mean_t = 20.0;
  t.axle_load_std_t = 3.0;
  return t;
}

void DegradationSchedule::validate() const {
  if (!(f2_drop_fraction >= 0.0 && f2_drop_fraction < 1.0)) {
    throw InvalidArgument("degradation schedule: drop fraction must lie in [0, 1)");
  }
  if (ramp_months < 0.0) throw InvalidArgument("degradation schedule: ramp must be nonnegative");
}

double DegradationSchedule::progress(Timestamp t) const {
  if (t < onset) return 0.0;
  const double elapsed = static_cast<double>((t - onset).count());
  const double ramp = ramp_months * kSecondsPerMonth;
  if (ramp <= 0.0 || elapsed >= ramp) return 1.0;
  return elapsed / ramp;
}

TemperatureSeries synth_temperature(int months, std::uint64_t seed, const TemperatureOptions& options) {
  if (months < 1) throw InvalidArgument("synth_temperature: months must be at least 1");
  using namespace std::chrono;
  const Timestamp begin = month_start(options.start);
  const Timestamp end = add_months(begin, months);
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double innovation = options.weather_std_c * std::sqrt(1.0 - options.weather_ar * options.weather_ar);
  double weather = options.weather_std_c * gauss(rng);

  std::vector<TemperatureSample> samples;
  for (Timestamp t = begin; t < end; t += hours{1}) {
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const double day_of_year =
        static_cast<double>((day - sys_days{ymd.year() / January / 1}).count()) +
        static_cast<double>(duration_cast<hours>(t - day).count()) / 24.0;
    const double hour = static_cast<double>(duration_cast<hours>(t - day).count());
    // coldest mid-January, warmest mid-afternoon
    double temp = options.annual_mean_c - options.annual_amplitude_c * std::cos(kTwoPi * (day_of_year - 15.0) / 365.25) -
                  options.daily_amplitude_c * std::cos(kTwoPi * (hour - 3.0) / 24.0) + weather;
    temp = std::clamp(temp, options.clamp_min_c, options.clamp_max_c);
    samples.push_back({t, temp});
    weather = options.weather_ar * weather + innovation * gauss(rng);
  }
  return TemperatureSeries(std::move(samples));
}

double healthy_f2(const TrackConfig& track, double temp_c) { return track.f2_map.evaluate(temp_c); }

PassageRecord synth_passage(const TrackConfig& track, const TrainConfig& train, double temp_c,
                            double degradation_offset_hz, std::uint64_t seed, const RecordOptions& options) {
  track.validate();
  train.validate();
  if (!(options.fs_hz > 0.0)) throw InvalidArgument("synth_passage: sample rate must be positive");
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double scatter = 0.0;
  if (track.scatter_sigma_hz > 0.0) {
    const double u = std::clamp(unif(rng), 1e-300, 1.0 - 1e-16);
    const double xi = track.scatter_xi;
    scatter = track.scatter_mu_hz + track.scatter_sigma_hz * (std::pow(-std::log(u), -xi) - 1.0) / xi;
  }
  const double f2 = healthy_f2(track, temp_c) - degradation_offset_hz + scatter;
  if (!(f2 > 0.0)) throw InvalidArgument("synth_passage: effective f2 is not positive (degenerate config)");

  const double fs = options.fs_hz;
  const double v = train.speed_kmh / 3.6;
  const double tau = options.detector_distance_m / v;

  PassageRecord rec;
  rec.meta.location_id = options.location_id;
  rec.meta.timestamp = options.timestamp;
  rec.meta.train_type = train.train_type;
  rec.meta.speed_kmh = train.speed_kmh;
  rec.meta.fs_hz = fs;
  rec.meta.true_f2_hz = f2;

  std::vector<double> arrivals;
  for (double p : train.bogie_positions_m) {
    for (double pos : {p, p + train.axle_spacing_m}) {
      const auto pulse = static_cast<std::size_t>(std::llround((options.pre_trigger_s + pos / v) * fs));
      rec.wheel_pulse_samples.push_back(pulse);
      arrivals.push_back(options.pre_trigger_s + pos / v + tau);
    }
  }
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    double load = train.axle_load_mean_t + train.axle_load_std_t * gauss(rng);
    rec.meta.axle_loads_t.push_back(std::max(load, 0.1 * train.axle_load_mean_t));
  }

  const auto n = static_cast<std::size_t>(std::ceil((arrivals.back() + options.tail_s) * fs));
  rec.accel_g.assign(n, 0.0);
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const double scale = track.amplitude_g * rec.meta.axle_loads_t[i] / train.axle_load_mean_t;
    add_damped_sine(rec.accel_g, fs, arrivals[i], f2, track.zeta2, scale);
    add_damped_sine(rec.accel_g, fs, arrivals[i], track.f1_hz, track.zeta1, scale * track.mode_amplitude_ratio);
    add_windowed_tone(rec.accel_g, fs, arrivals[i], track.hf_hz, track.hf_envelope_s, scale * track.hf_amplitude_ratio);
  }
  if (track.noise_std > 0.0) {
    double peak = 0.0;
    for (double a : rec.accel_g) peak = std::max(peak, std::abs(a));
    const double sd = track.noise_std * peak;
    for (double& a : rec.accel_g) a += sd * gauss(rng);
  }
  return rec;
}

std::vector<PassagePlan> plan_campaign(const TrackConfig& track, const TrainConfig& train,
                                       const DegradationSchedule& schedule, const TemperatureSeries& temps,
                                       int trains_per_month, std::uint64_t seed, const CampaignOptions& options) {
  if (trains_per_month < 1) throw InvalidArgument("synth_campaign: trains_per_month must be at least 1");
  if (temps.empty()) throw InvalidArgument("synth_campaign: empty temperature series");
  schedule.validate();
  track.validate();
  train.validate();

  std::mt19937_64 rng(splitmix64(seed ^ 0x5eed5eedULL));
  const Timestamp cover_begin = temps.samples().front().time;
  const Timestamp cover_end = temps.samples().back().time;
  const auto n_freight = static_cast<int>(std::lround(options.freight_fraction * trains_per_month));
  const TrainConfig freight = freight_train();

  std::vector<PassagePlan> plans;
  for (Timestamp m = month_start(cover_begin); m <= cover_end; m = add_months(m, 1)) {
    const Timestamp lo = std::max(m, cover_begin);
    const Timestamp hi = std::min(add_months(m, 1) - std::chrono::seconds{1}, cover_end);
    if (hi <= lo) continue;
    std::uniform_int_distribution<long long> when(lo.time_since_epoch().count(), hi.time_since_epoch().count());
    auto add = [&](const TrainConfig& base, double vmin, double vmax) {
      PassagePlan p;
      p.timestamp = Timestamp{std::chrono::seconds{when(rng)}};
      p.train = base;
      p.train.speed_kmh = std::uniform_real_distribution<double>(vmin, vmax)(rng);
      p.temp_c = *temps.nearest(p.timestamp);
      plans.push_back(std::move(p));
    };
    for (int i = 0; i < trains_per_month; ++i) add(train, options.speed_min_kmh, options.speed_max_kmh);
    for (int i = 0; i < n_freight; ++i) add(freight, 80.0, 100.0);
  }
  std::stable_sort(plans.begin(), plans.end(),
                   [](const PassagePlan& a, const PassagePlan& b) { return a.timestamp < b.timestamp; });
  for (std::size_t i = 0; i < plans.size(); ++i) {
    auto& p = plans[i];
    p.degradation_offset_hz = schedule.f2_drop_fraction * schedule.progress(p.timestamp) * healthy_f2(track, p.temp_c);
    p.seed = splitmix64(seed + 0x1000003ULL * (i + 1));
  }
  return plans;
}

PassageRecord realize(const TrackConfig& track, const PassagePlan& plan, const CampaignOptions& options) {
  RecordOptions rec = options.record;
  rec.location_id = options.location_id;
  rec.timestamp = plan.timestamp;
  return synth_passage(track, plan.train, plan.temp_c, plan.degradation_offset_hz, plan.seed, rec);
}

std::vector<PassageRecord> synth_campaign(const TrackConfig& track, const TrainConfig& train,
                                          const DegradationSchedule& schedule, const TemperatureSeries& temps,
                                          int trains_per_month, std::uint64_t seed, const CampaignOptions& options) {
  std::vector<PassageRecord> out;
  for (const auto& plan : plan_campaign(track, train, schedule, temps, trains_per_month, seed, options)) {
    out.push_back(realize(track, plan, options));
  }
  return out;
}

}  // namespace railpad::sim

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "railpad/ingest.hpp"
#include "railpad/temperature.hpp"
#include "railpad/tempmodel.hpp"

namespace railpad::sim {

/// Track dynamics seen by one accelerometer.
struct TrackConfig {
  /// First (rail+sleeper on ballast) resonance.
  double f1_hz = 180.0;
  /// Healthy temperature → second-resonance map, including location offset.
  TempFreqModel f2_map = nominal_railpad_map();
  double zeta1 = 0.05;
  double zeta2 = 0.02;
  /// Amplitude of mode 1 relative to mode 2.
  double mode_amplitude_ratio = 0.5;
  /// Rail vibration above the railpad band: a tone under a Gaussian
  /// envelope (std hf_envelope_s) centred on every wheel arrival, amplitude
  /// relative to mode 2. It is what the first IMF picks up.
  double hf_hz = 1600.0;
  double hf_amplitude_ratio = 2.0;
  double hf_envelope_s = 0.03;
  /// White measurement noise std as a fraction of the clean peak amplitude.
  double noise_std = 0.1;
  /// Peak scale of one wheel impulse response, in g.
  double amplitude_g = 20.0;
  /// Per-passage scatter of f2 (Hz) drawn from a GEV law; scale 0 disables.
  double scatter_mu_hz = 0.0;
  double scatter_sigma_hz = 6.0;
  double scatter_xi = -0.1;

  void validate() const;
};

/// noise_std value giving the requested peak-to-noise ratio.
double noise_std_for_snr_db(double snr_db);

struct TrainConfig {
  std::string train_type = "IC3";
  /// Offset of the first axle of each bogie from the train front (m).
  std::vector<double> bogie_positions_m = {2.0, 19.6, 39.2, 56.8};
  double axle_spacing_m = 2.6;
  double speed_kmh = 157.5;
  double axle_load_mean_t = 13.0;
  double axle_load_std_t = 0.15;

  std::size_t n_bogies() const { return bogie_positions_m.size(); }
  void validate() const;
};

/// Freight-like consist used to exercise screening.
TrainConfig freight_train();

struct DegradationSchedule {
  Timestamp onset{};
  double ramp_months = 0.0;
  /// Relative permanent decrease of the healthy map value.
  double f2_drop_fraction = 0.0;

  void validate() const;
  /// 0 before onset, 1 after the ramp, linear in between.
  double progress(Timestamp t) const;
};

struct RecordOptions {
  std::string location_id = "A2";
  Timestamp timestamp{};
  double fs_hz = kDefaultSampleRateHz;
  /// Distance from wheel detector to accelerometer.
  double detector_distance_m = 5.0;
  /// Recording starts this long before the first detector pulse.
  double pre_trigger_s = 0.05;
  double tail_s = 0.1;
};

struct TemperatureOptions {
  Timestamp start = std::chrono::sys_days{std::chrono::year{2017} / std::chrono::September / 1};
  double annual_mean_c = 11.0;
  double annual_amplitude_c = 11.0;
  double daily_amplitude_c = 4.0;
  /// Std of the AR(1) weather component.
  double weather_std_c = 2.5;
  double weather_ar = 0.995;
  double clamp_min_c = -5.0;
  double clamp_max_c = 30.0;
};

/// Hourly series covering `months` calendar months from `options.start`.
TemperatureSeries synth_temperature(int months, std::uint64_t seed, const TemperatureOptions& options = {});

/// Healthy second-resonance frequency at temperature `temp_c`.
double healthy_f2(const TrackConfig& track, double temp_c);

/// One passage: every wheel excites decaying modes at f1 and f2 plus the
/// windowed rail vibration, all with amplitude proportional to its axle load. The
/// mode-2 natural frequency is healthy_f2(T) - degradation_offset_hz plus
/// the per-passage scatter; the value used is stored in meta.true_f2_hz.
PassageRecord synth_passage(const TrackConfig& track, const TrainConfig& train, double temp_c,
                            double degradation_offset_hz, std::uint64_t seed, const RecordOptions& options = {});

/// Everything needed to realize one campaign passage without holding the
/// samples in memory.
struct PassagePlan {
  Timestamp timestamp{};
  TrainConfig train;
  double temp_c = 0.0;
  double degradation_offset_hz = 0.0;
  std::uint64_t seed = 0;
};

struct CampaignOptions {
  std::string location_id = "A2";
  /// Extra freight passages per month, as a fraction of trains_per_month.
  double freight_fraction = 0.0;
  double speed_min_kmh = 155.0;
  double speed_max_kmh = 160.0;
  RecordOptions record;
};

std::vector<PassagePlan> plan_campaign(const TrackConfig& track, const TrainConfig& train,
                                       const DegradationSchedule& schedule, const TemperatureSeries& temps,
                                       int trains_per_month, std::uint64_t seed, const CampaignOptions& options = {});

PassageRecord realize(const TrackConfig& track, const PassagePlan& plan, const CampaignOptions& options = {});

/// Materialized campaign, ordered by timestamp.
std::vector<PassageRecord> synth_campaign(const TrackConfig& track, const TrainConfig& train,
                                          const DegradationSchedule& schedule, const TemperatureSeries& temps,
                                          int trains_per_month, std::uint64_t seed,
                                          const CampaignOptions& options = {});

}  // namespace railpad::sim

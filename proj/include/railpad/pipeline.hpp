#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "railpad/detect.hpp"
#include "railpad/ingest.hpp"
#include "railpad/modal.hpp"
#include "railpad/passage_io.hpp"
#include "railpad/sim.hpp"
#include "railpad/tempmodel.hpp"

namespace railpad::pipeline {

struct SimLocation {
  std::string id;
  double offset_hz = 0.0;
  /// 1-based campaign month in which degradation starts; 0 = healthy.
  int onset_month = 0;
  double ramp_months = 0.0;
  double drop_fraction = 0.0;
};

struct SimulatorSettings {
  int months = 18;
  int trains_per_month = 100;
  Timestamp start = std::chrono::sys_days{std::chrono::year{2017} / std::chrono::September / 1};
  std::uint64_t seed = 1;
  double freight_fraction = 0.1;
  PassageFormat format = PassageFormat::Binary;
  double snr_db = 20.0;
  /// Per-passage GEV scatter of f2 (see sim::TrackConfig).
  double scatter_sigma_hz = sim::TrackConfig{}.scatter_sigma_hz;
  double scatter_xi = sim::TrackConfig{}.scatter_xi;
  std::vector<SimLocation> locations;
};

enum class CalibrationScheme {
  /// theta0 refitted on every estimation window of the reference location;
  /// each one scores all non-overlapping detection windows.
  Rotating,
  /// One theta0 from the first estimation window; overlapping windows of
  /// the median monthly size, hop stride_fraction of that size.
  Rolling,
};

struct CalibrationSettings {
  std::string location = "A2";
  CalibrationScheme scheme = CalibrationScheme::Rotating;
  double stride_fraction = 0.25;
  /// Skips the H0 pool when set.
  std::optional<double> alpha0g;
};

struct PipelineConfig {
  std::filesystem::path passage_dir = "passages";
  std::filesystem::path temperature_file = "temperature.csv";
  std::filesystem::path output_dir = "out";
  ScreeningRule screening;
  modal::EstimationOptions estimation;
  tempmodel::BinOptions bins;
  tempmodel::FitOptions fit;
  /// Locations whose estimates are pooled for the temperature model.
  std::vector<std::string> reference_locations = {"A2"};
  /// Use only the first N months of reference data (0 = all).
  int fit_months = 0;
  DetectorSettings detector;
  CalibrationSettings calibration;
  int bootstrap_replicates = 0;
  std::optional<SimulatorSettings> simulator;
  unsigned threads = 0;

  /// Throws ConfigError on out-of-range settings.
  void validate() const;

  std::filesystem::path estimates_path() const { return output_dir / "estimates.csv"; }
  std::filesystem::path skipped_path() const { return output_dir / "extract_skipped.csv"; }
  std::filesystem::path model_path() const { return output_dir / "model.json"; }
  std::filesystem::path residuals_path() const { return output_dir / "residuals.csv"; }
  std::filesystem::path fit_table_path() const { return output_dir / "fit_table.csv"; }
  std::filesystem::path detection_path() const { return output_dir / "detection.csv"; }
  std::filesystem::path h0_path() const { return output_dir / "h0_statistics.csv"; }
  std::filesystem::path summary_path() const { return output_dir / "summary.json"; }
  std::filesystem::path state_path(const std::string& location) const {
    return output_dir / ("detector_state_" + location + ".json");
  }
  std::filesystem::path report_dir() const { return output_dir / "report"; }
  std::filesystem::path manifest_path() const { return passage_dir / "manifest.csv"; }
};

/// JSON config; relative paths are resolved against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const std::string& json_text, const std::filesystem::path& base_dir = {});

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> location;
};

struct CommandResult {
  std::size_t outputs = 0;
  std::size_t warnings = 0;
};

/// Healthy track for one simulated location.
sim::TrackConfig track_for(const SimLocation& location, const SimulatorSettings& settings);
sim::DegradationSchedule schedule_for(const SimLocation& location, Timestamp campaign_start);

// In-memory stages shared by the commands.

/// Bins the reference estimates and fits the piecewise model.
tempmodel::PiecewiseFit fit_reference_model(std::span<const FrequencyEstimate> estimates,
                                            const PipelineConfig& config);

/// Per-location residuals; the model is shifted onto each location using
/// its estimation window (first estimation_months months).
std::vector<ResidualSequence> location_residuals(std::span<const FrequencyEstimate> estimates,
                                                 const TempFreqModel& model, int estimation_months,
                                                 std::vector<double>* offsets = nullptr);

struct MonthlyWindow {
  std::string label;
  std::vector<double> values;
};

/// Consecutive calendar windows of `months` months covering the sequence
/// (empty months included), starting after `skip_months` months.
std::vector<MonthlyWindow> calendar_windows(const ResidualSequence& seq, int skip_months, int months);

/// H0 statistics of the reference sequence; windows whose residuals leave
/// theta0's support are counted in `outside_support` and left out.
std::vector<double> h0_statistics(const ResidualSequence& reference, const PipelineConfig& config,
                                  std::size_t* outside_support = nullptr);

struct DetectionRun {
  detect::Calibration calibration;
  std::vector<double> h0_statistics;
  std::size_t h0_outside_support = 0;
  std::vector<DetectorState> states;
  std::vector<DetectionReport> reports;
};

/// Calibrates on the reference location and runs every location (or only
/// `only`, when given).
DetectionRun run_detection(std::span<const ResidualSequence> sequences, const PipelineConfig& config,
                           const std::optional<std::string>& only = std::nullopt);

CommandResult cmd_simulate(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);
CommandResult cmd_extract(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);
CommandResult cmd_fit_temp(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);
CommandResult cmd_residuals(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);
CommandResult cmd_fit_dist(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);
CommandResult cmd_detect(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);
CommandResult cmd_report(const PipelineConfig& config, const CommandOptions& options, std::ostream& log);

}  // namespace railpad::pipeline

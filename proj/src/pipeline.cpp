#include "railpad/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "railpad/error.hpp"
#include "railpad/evd.hpp"
#include "railpad/passage_io.hpp"
#include "railpad/stats.hpp"
#include "railpad/temperature.hpp"
#include "railpad/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace railpad::pipeline {

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

json section(const json& root, const char* key) {
  if (!root.contains(key)) return json::object();
  const json& s = root.at(key);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

PassageFormat parse_format(const std::string& s) {
  if (s == "binary") return PassageFormat::Binary;
  if (s == "csv") return PassageFormat::Csv;
  throw ConfigError("simulator.format must be 'binary' or 'csv', got '" + s + "'");
}

void require_file(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + "; run `railpad " + stage + "` first");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::uint64_t location_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

bool location_selected(const CommandOptions& options, const std::string& id) {
  return !options.location || *options.location == id;
}

std::map<std::string, std::vector<FrequencyEstimate>> by_location(std::span<const FrequencyEstimate> estimates) {
  std::map<std::string, std::vector<FrequencyEstimate>> out;
  for (const auto& e : estimates) out[e.location_id].push_back(e);
  for (auto& [id, v] : out) {
    std::stable_sort(v.begin(), v.end(),
                     [](const FrequencyEstimate& a, const FrequencyEstimate& b) { return a.timestamp < b.timestamp; });
  }
  return out;
}

/// Estimates within the first `months` calendar months of the (sorted) sequence.
std::vector<FrequencyEstimate> first_months(std::span<const FrequencyEstimate> sorted, int months) {
  if (sorted.empty() || months <= 0) return {sorted.begin(), sorted.end()};
  const Timestamp end = add_months(month_start(sorted.front().timestamp), months);
  std::vector<FrequencyEstimate> out;
  for (const auto& e : sorted) {
    if (e.timestamp < end) out.push_back(e);
  }
  return out;
}

std::vector<double> first_month_values(const ResidualSequence& seq, int months) {
  std::vector<double> out;
  if (seq.size() == 0) return out;
  const Timestamp first = *std::min_element(seq.timestamps.begin(), seq.timestamps.end());
  const Timestamp end = add_months(month_start(first), months);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.timestamps[i] < end) out.push_back(seq.values[i]);
  }
  return out;
}

std::vector<fs::path> list_passage_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "manifest.csv" || name.empty() || name.front() == '.') continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

void PipelineConfig::validate() const {
  if (passage_dir.empty() || temperature_file.empty() || output_dir.empty()) {
    throw ConfigError("paths.passage_dir, paths.temperature_file and paths.output_dir must be set");
  }
  try {
    screening.validate();
    detector.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!(estimation.preprocess.cutoff_hz > 0.0) || estimation.preprocess.filter_order < 1) {
    throw ConfigError("filter: cutoff_hz must be positive and order at least 1");
  }
  if (!(estimation.preprocess.detector_distance_m >= 0.0)) throw ConfigError("sync.detector_distance_m must be >= 0");
  if (estimation.hankel_rows < 3) throw ConfigError("identification.hankel_rows must be at least 3");
  if (!(estimation.band_min_hz > 0.0 && estimation.band_min_hz < estimation.band_max_hz)) {
    throw ConfigError("identification: band_min_hz must be positive and below band_max_hz");
  }
  if (!(estimation.max_prediction_error > 0.0)) throw ConfigError("identification.max_prediction_error must be > 0");
  if (estimation.emd.max_imfs < 2) throw ConfigError("emd.max_imfs must be at least 2");
  if (!(estimation.emd.min_swing_fraction >= 0.0 && estimation.emd.min_swing_fraction < 1.0)) {
    throw ConfigError("emd.min_swing_fraction must lie in [0, 1)");
  }
  if (!(estimation.emd.sd_threshold > 0.0) || estimation.emd.max_sifts < 1) {
    throw ConfigError("emd: sd_threshold must be positive and max_sifts at least 1");
  }
  if (bins.n_bins < 3 || !(bins.t_min < bins.t_max)) {
    throw ConfigError("tempmodel: n_bins must be at least 3 and t_min below t_max");
  }
  if (!(fit.grid_step_c > 0.0)) throw ConfigError("tempmodel.grid_step_c must be positive");
  if (reference_locations.empty()) throw ConfigError("tempmodel.reference_locations must not be empty");
  if (fit_months < 0) throw ConfigError("tempmodel.fit_months must be >= 0");
  if (!(calibration.stride_fraction > 0.0 && calibration.stride_fraction <= 1.0)) {
    throw ConfigError("detector.calibration.stride_fraction must lie in (0, 1]");
  }
  if (calibration.location.empty()) throw ConfigError("detector.calibration.location must be set");
  if (calibration.alpha0g && !(*calibration.alpha0g > 0.0)) throw ConfigError("detector.alpha0g must be positive");
  if (bootstrap_replicates < 0) throw ConfigError("fit_dist.bootstrap_replicates must be >= 0");
  if (simulator) {
    const auto& s = *simulator;
    if (s.months < 1) throw ConfigError("simulator.months must be at least 1");
    if (s.trains_per_month < 1) throw ConfigError("simulator.trains_per_month must be at least 1");
    if (!(s.freight_fraction >= 0.0)) throw ConfigError("simulator.freight_fraction must be >= 0");
    if (s.locations.empty()) throw ConfigError("simulator.locations must not be empty");
    std::set<std::string> ids;
    for (const auto& l : s.locations) {
      if (l.id.empty() || l.id.find_first_of(",/\\ ") != std::string::npos) {
        throw ConfigError("simulator location id '" + l.id + "' is empty or contains separators");
      }
      if (!ids.insert(l.id).second) throw ConfigError("duplicate simulator location '" + l.id + "'");
      if (l.onset_month < 0 || l.ramp_months < 0.0 || !(l.drop_fraction >= 0.0 && l.drop_fraction < 1.0)) {
        throw ConfigError("simulator location '" + l.id + "': invalid degradation settings");
      }
    }
  }
}

PipelineConfig config_from_json(const std::string& json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  PipelineConfig c;
  const json paths = section(root, "paths");
  std::string s;
  s = c.passage_dir.string();
  read_field(paths, "passage_dir", s);
  c.passage_dir = resolve(base_dir, s);
  s = c.temperature_file.string();
  read_field(paths, "temperature_file", s);
  c.temperature_file = resolve(base_dir, s);
  s = c.output_dir.string();
  read_field(paths, "output_dir", s);
  c.output_dir = resolve(base_dir, s);

  const json scr = section(root, "screening");
  read_field(scr, "train_type", c.screening.train_type);
  read_field(scr, "speed_min_kmh", c.screening.speed_min_kmh);
  read_field(scr, "speed_max_kmh", c.screening.speed_max_kmh);
  read_field(scr, "max_load_cov", c.screening.max_load_cov);

  auto& pre = c.estimation.preprocess;
  const json filt = section(root, "filter");
  read_field(filt, "cutoff_hz", pre.cutoff_hz);
  read_field(filt, "order", pre.filter_order);
  const json sync = section(root, "sync");
  read_field(sync, "detector_distance_m", pre.detector_distance_m);
  read_field(sync, "end_margin_fraction", pre.slice.end_margin_fraction);
  read_field(sync, "pair_gap_factor", pre.slice.pair_gap_factor);
  read_field(sync, "min_segment_samples", pre.slice.min_samples);

  const json emd = section(root, "emd");
  read_field(emd, "sd_threshold", c.estimation.emd.sd_threshold);
  read_field(emd, "max_sifts", c.estimation.emd.max_sifts);
  read_field(emd, "max_imfs", c.estimation.emd.max_imfs);
  read_field(emd, "min_swing_fraction", c.estimation.emd.min_swing_fraction);

  const json ident = section(root, "identification");
  read_field(ident, "hankel_rows", c.estimation.hankel_rows);
  read_field(ident, "band_min_hz", c.estimation.band_min_hz);
  read_field(ident, "band_max_hz", c.estimation.band_max_hz);
  read_field(ident, "max_prediction_error", c.estimation.max_prediction_error);

  const json tm = section(root, "tempmodel");
  read_field(tm, "n_bins", c.bins.n_bins);
  read_field(tm, "t_min", c.bins.t_min);
  read_field(tm, "t_max", c.bins.t_max);
  read_field(tm, "free_middle_slope", c.fit.free_middle_slope);
  read_field(tm, "grid_step_c", c.fit.grid_step_c);
  read_field(tm, "min_outer_points", c.fit.min_outer_points);
  read_field(tm, "reference_locations", c.reference_locations);
  read_field(tm, "fit_months", c.fit_months);

  const json det = section(root, "detector");
  read_field(det, "pfa", c.detector.pfa);
  read_field(det, "estimation_months", c.detector.estimation_months);
  read_field(det, "detection_months", c.detector.detection_months);
  read_field(det, "min_window", c.detector.min_window);
  if (det.contains("alpha0g")) {
    double a = 0.0;
    read_field(det, "alpha0g", a);
    c.calibration.alpha0g = a;
  }
  const json cal = section(det, "calibration");
  read_field(cal, "location", c.calibration.location);
  read_field(cal, "stride_fraction", c.calibration.stride_fraction);
  if (cal.contains("scheme")) {
    std::string scheme;
    read_field(cal, "scheme", scheme);
    if (scheme == "rotating") {
      c.calibration.scheme = CalibrationScheme::Rotating;
    } else if (scheme == "rolling") {
      c.calibration.scheme = CalibrationScheme::Rolling;
    } else {
      throw ConfigError("detector.calibration.scheme must be 'rotating' or 'rolling', got '" + scheme + "'");
    }
  }

  const json fd = section(root, "fit_dist");
  read_field(fd, "bootstrap_replicates", c.bootstrap_replicates);

  const json ex = section(root, "extract");
  read_field(ex, "threads", c.threads);

  if (root.contains("simulator")) {
    const json sj = section(root, "simulator");
    SimulatorSettings sim;
    read_field(sj, "months", sim.months);
    read_field(sj, "trains_per_month", sim.trains_per_month);
    read_field(sj, "seed", sim.seed);
    read_field(sj, "freight_fraction", sim.freight_fraction);
    read_field(sj, "snr_db", sim.snr_db);
    read_field(sj, "scatter_sigma_hz", sim.scatter_sigma_hz);
    read_field(sj, "scatter_xi", sim.scatter_xi);
    if (sj.contains("start")) {
      std::string start;
      read_field(sj, "start", start);
      try {
        sim.start = parse_iso8601(start);
      } catch (const Error& e) {
        throw ConfigError(std::string("simulator.start: ") + e.what());
      }
    }
    if (sj.contains("format")) {
      std::string f;
      read_field(sj, "format", f);
      sim.format = parse_format(f);
    }
    if (sj.contains("locations")) {
      if (!sj.at("locations").is_array()) throw ConfigError("simulator.locations must be an array");
      for (const auto& lj : sj.at("locations")) {
        if (!lj.is_object()) throw ConfigError("simulator.locations entries must be objects");
        SimLocation loc;
        read_field(lj, "id", loc.id);
        read_field(lj, "offset_hz", loc.offset_hz);
        const json dg = section(lj, "degradation");
        read_field(dg, "onset_month", loc.onset_month);
        read_field(dg, "ramp_months", loc.ramp_months);
        read_field(dg, "drop_fraction", loc.drop_fraction);
        sim.locations.push_back(loc);
      }
    } else {
      sim.locations.push_back(SimLocation{"A2"});
    }
    c.simulator = sim;
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str(), path.parent_path());
}

sim::TrackConfig track_for(const SimLocation& location, const SimulatorSettings& settings) {
  sim::TrackConfig t;
  t.f2_map.y_offset += location.offset_hz;
  t.noise_std = sim::noise_std_for_snr_db(settings.snr_db);
  t.scatter_sigma_hz = settings.scatter_sigma_hz;
  t.scatter_xi = settings.scatter_xi;
  t.validate();
  return t;
}

sim::DegradationSchedule schedule_for(const SimLocation& location, Timestamp campaign_start) {
  sim::DegradationSchedule s;
  if (location.onset_month > 0 && location.drop_fraction > 0.0) {
    s.onset = add_months(month_start(campaign_start), location.onset_month - 1);
    s.ramp_months = location.ramp_months;
    s.f2_drop_fraction = location.drop_fraction;
  } else {
    s.onset = campaign_start;
  }
  s.validate();
  return s;
}

tempmodel::PiecewiseFit fit_reference_model(std::span<const FrequencyEstimate> estimates,
                                            const PipelineConfig& config) {
  const auto grouped = by_location(estimates);
  std::vector<FrequencyEstimate> pool;
  for (const auto& id : config.reference_locations) {
    auto it = grouped.find(id);
    if (it == grouped.end()) continue;
    auto part = first_months(it->second, config.fit_months);
    pool.insert(pool.end(), part.begin(), part.end());
  }
  if (pool.empty()) throw DataError("no estimates for the reference locations of the temperature model");
  const auto points = tempmodel::bin_by_temperature(pool, config.bins);
  auto fit = tempmodel::fit_piecewise(points, config.fit);
  fit.model.t_min = config.bins.t_min;
  fit.model.t_max = config.bins.t_max;
  return fit;
}

std::vector<ResidualSequence> location_residuals(std::span<const FrequencyEstimate> estimates,
                                                 const TempFreqModel& model, int estimation_months,
                                                 std::vector<double>* offsets) {
  std::vector<ResidualSequence> out;
  if (offsets) offsets->clear();
  for (const auto& [id, seq] : by_location(estimates)) {
    const auto baseline = first_months(seq, estimation_months);
    const TempFreqModel shifted = tempmodel::shift_to_location(model, baseline);
    out.push_back(tempmodel::residuals(seq, shifted));
    out.back().location_id = id;
    if (offsets) offsets->push_back(shifted.y_offset);
  }
  return out;
}

std::vector<MonthlyWindow> calendar_windows(const ResidualSequence& seq, int skip_months, int months) {
  if (months < 1) throw InvalidArgument("calendar_windows: window length must be at least one month");
  std::vector<MonthlyWindow> out;
  if (seq.size() == 0) return out;
  const auto [lo, hi] = std::minmax_element(seq.timestamps.begin(), seq.timestamps.end());
  const Timestamp first = month_start(*lo);
  const Timestamp last = month_start(*hi);
  for (int k = skip_months;; k += months) {
    const Timestamp begin = add_months(first, k);
    if (begin > last) break;
    const Timestamp end = add_months(begin, months);
    MonthlyWindow w;
    w.label = month_label(begin);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq.timestamps[i] >= begin && seq.timestamps[i] < end) w.values.push_back(seq.values[i]);
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<double> h0_statistics(const ResidualSequence& reference, const PipelineConfig& config,
                                  std::size_t* outside_support) {
  const auto& settings = config.detector;
  std::size_t outside = 0;
  std::vector<double> out;
  if (config.calibration.scheme == CalibrationScheme::Rolling) {
    const GevParams theta0 = evd::fit_gev(first_month_values(reference, settings.estimation_months)).params;
    std::vector<double> counts;
    for (const auto& w : calendar_windows(reference, 0, settings.detection_months)) {
      if (!w.values.empty()) counts.push_back(static_cast<double>(w.values.size()));
    }
    std::vector<std::size_t> idx(reference.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return reference.timestamps[a] < reference.timestamps[b];
    });
    std::vector<double> ordered(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) ordered[i] = reference.values[idx[i]];
    const auto window =
        std::max<std::size_t>(settings.min_window, static_cast<std::size_t>(std::lround(stats::median(counts))));
    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(window) * config.calibration.stride_fraction)));
    for (std::size_t start = 0; start + window <= ordered.size(); start += stride) {
      try {
        const auto res = detect::glrt_statistic(std::span(ordered).subspan(start, window), theta0);
        if (res.outside_support) {
          ++outside;
        } else {
          out.push_back(std::max(res.g, 0.0));
        }
      } catch (const Error&) {
      }
    }
  } else {
    const auto baselines = calendar_windows(reference, 0, settings.estimation_months);
    const auto windows = calendar_windows(reference, 0, settings.detection_months);
    for (std::size_t b = 0; b < baselines.size(); ++b) {
      if (baselines[b].values.size() < settings.min_window) continue;
      GevParams theta0;
      try {
        theta0 = evd::fit_gev(baselines[b].values).params;
      } catch (const Error&) {
        continue;
      }
      const int b_begin = static_cast<int>(b) * settings.estimation_months;
      const int b_end = b_begin + settings.estimation_months;
      for (std::size_t d = 0; d < windows.size(); ++d) {
        const int d_begin = static_cast<int>(d) * settings.detection_months;
        const int d_end = d_begin + settings.detection_months;
        if (d_begin < b_end && b_begin < d_end) continue;
        if (windows[d].values.size() < settings.min_window) continue;
        try {
          const auto res = detect::glrt_statistic(windows[d].values, theta0);
          if (res.outside_support) {
            ++outside;
          } else {
            out.push_back(std::max(res.g, 0.0));
          }
        } catch (const Error&) {
        }
      }
    }
  }
  if (outside_support) *outside_support = outside;
  return out;
}

DetectionRun run_detection(std::span<const ResidualSequence> sequences, const PipelineConfig& config,
                           const std::optional<std::string>& only) {
  const auto& settings = config.detector;
  DetectionRun run;
  if (config.calibration.alpha0g) {
    run.calibration.alpha0g = *config.calibration.alpha0g;
    run.calibration.gamma_g = detect::threshold(run.calibration.alpha0g, settings.pfa);
  } else {
    auto ref = std::find_if(sequences.begin(), sequences.end(), [&](const ResidualSequence& s) {
      return s.location_id == config.calibration.location;
    });
    if (ref == sequences.end()) {
      throw DataError("calibration location '" + config.calibration.location + "' has no residuals");
    }
    run.h0_statistics = h0_statistics(*ref, config, &run.h0_outside_support);
    run.calibration = detect::calibrate(run.h0_statistics, settings.pfa);
  }

  for (const auto& seq : sequences) {
    if (only && seq.location_id != *only) continue;
    const auto windows = calendar_windows(seq, 0, 1);
    const std::string baseline_label = windows.empty() ? "" : windows.front().label;
    DetectorState state =
        detect::initialize(seq.location_id, baseline_label, first_month_values(seq, settings.estimation_months),
                           settings);
    detect::apply_calibration(state, run.calibration);
    for (const auto& w : calendar_windows(seq, settings.estimation_months, settings.detection_months)) {
      run.reports.push_back(detect::step(state, w.label, w.values));
    }
    run.states.push_back(std::move(state));
  }
  return run;
}

CommandResult cmd_simulate(const PipelineConfig& config, const CommandOptions& options, std::ostream& log) {
  if (!config.simulator) throw ConfigError("simulate needs a 'simulator' section in the config");
  SimulatorSettings sim = *config.simulator;
  if (options.seed) sim.seed = *options.seed;
  if (sim.months < 1) throw ConfigError("simulator.months must be at least 1");

  sim::TemperatureOptions topt;
  topt.start = month_start(sim.start);
  topt.clamp_min_c = config.bins.t_min;
  topt.clamp_max_c = config.bins.t_max;
  const TemperatureSeries temps = sim::synth_temperature(sim.months, sim.seed, topt);
  if (config.temperature_file.has_parent_path()) ensure_dir(config.temperature_file.parent_path());
  write_temperature_csv(config.temperature_file, temps);
  ensure_dir(config.passage_dir);

  struct Row {
    std::string path, location, timestamp, train_type;
    double true_f2;
  };
  std::vector<Row> manifest;
  CommandResult result;
  const std::string ext = sim.format == PassageFormat::Binary ? ".bin" : ".csv";
  const sim::TrainConfig train;
  for (std::size_t li = 0; li < sim.locations.size(); ++li) {
    const SimLocation& loc = sim.locations[li];
    if (!location_selected(options, loc.id)) continue;
    const sim::TrackConfig track = track_for(loc, sim);
    sim::CampaignOptions copt;
    copt.location_id = loc.id;
    copt.freight_fraction = sim.freight_fraction;
    copt.record.location_id = loc.id;
    copt.record.detector_distance_m = config.estimation.preprocess.detector_distance_m;
    const auto plans = sim::plan_campaign(track, train, schedule_for(loc, topt.start), temps, sim.trains_per_month,
                                          location_seed(sim.seed, li), copt);
    ensure_dir(config.passage_dir / loc.id);
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const PassageRecord rec = sim::realize(track, plans[i], copt);
      char name[32];
      std::snprintf(name, sizeof name, "_%06zu", i);
      const fs::path rel = fs::path(loc.id) / (loc.id + name + ext);
      write_passage(config.passage_dir / rel, rec, sim.format);
      manifest.push_back({rel.generic_string(), loc.id, format_iso8601(rec.meta.timestamp), rec.meta.train_type,
                          rec.meta.true_f2_hz.value_or(std::nan(""))});
    }
    log << "simulate: " << loc.id << ": " << plans.size() << " passages\n";
    result.outputs += plans.size();
  }
  if (options.location && manifest.empty()) {
    throw ConfigError("location '" + *options.location + "' is not configured in the simulator section");
  }
  auto out = open_out(config.manifest_path());
  out << "path,location_id,timestamp,train_type,true_f2_hz\n";
  for (const auto& r : manifest) {
    out << r.path << ',' << r.location << ',' << r.timestamp << ',' << r.train_type << ','
        << text::format_double(r.true_f2) << '\n';
  }
  log << "simulate: wrote " << config.temperature_file.string() << " and " << config.manifest_path().string()
      << '\n';
  return result;
}

CommandResult cmd_extract(const PipelineConfig& config, const CommandOptions& options, std::ostream& log) {
  require_file(config.temperature_file, "simulate");
  if (!fs::is_directory(config.passage_dir)) {
    throw DataError("missing passage directory " + config.passage_dir.string() + "; run `railpad simulate` first");
  }
  const TemperatureSeries temps = read_temperature_csv(config.temperature_file);
  ensure_dir(config.output_dir);

  struct Skip {
    std::string path, reason;
  };
  std::vector<Skip> skipped;
  std::size_t screened_out = 0;
  std::vector<fs::path> candidates;
  for (const auto& p : list_passage_files(config.passage_dir)) {
    try {
      const PassageMeta meta = read_passage_meta(p);
      if (!location_selected(options, meta.location_id)) continue;
      if (!config.screening.accepts(meta)) {
        ++screened_out;
        skipped.push_back({p.string(), "screening"});
        continue;
      }
      candidates.push_back(p);
    } catch (const Error& e) {
      skipped.push_back({p.string(), one_line(e.what())});
    }
  }

  std::vector<std::optional<FrequencyEstimate>> results(candidates.size());
  std::vector<std::string> errors(candidates.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      try {
        const PassageRecord rec = read_passage(candidates[i]);
        results[i] = modal::estimate_passage(rec, temps, config.estimation, i, config.bins.t_min, config.bins.t_max);
      } catch (const Error& e) {
        errors[i] = one_line(e.what());
      }
    }
  };
  unsigned n_threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(1, candidates.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<FrequencyEstimate> estimates;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (results[i]) {
      estimates.push_back(*results[i]);
    } else {
      skipped.push_back({candidates[i].string(), errors[i]});
    }
  }
  std::stable_sort(estimates.begin(), estimates.end(), [](const FrequencyEstimate& a, const FrequencyEstimate& b) {
    return std::tie(a.location_id, a.timestamp) < std::tie(b.location_id, b.timestamp);
  });
  std::sort(skipped.begin(), skipped.end(), [](const Skip& a, const Skip& b) { return a.path < b.path; });
  modal::write_estimate_log(config.estimates_path(), estimates);
  auto out = open_out(config.skipped_path());
  out << "path,reason\n";
  for (const auto& s : skipped) out << csv_field(s.path) << ',' << csv_field(s.reason) << '\n';

  CommandResult result;
  result.outputs = estimates.size();
  result.warnings = skipped.size() - screened_out;
  if (candidates.empty() && screened_out == 0) {
    log << "warning: no passage files found in " << config.passage_dir.string() << '\n';
    ++result.warnings;
  }
  log << "extract: " << estimates.size() << " estimates, " << screened_out << " screened out, "
      << (skipped.size() - screened_out) << " skipped (see " << config.skipped_path().string() << ")\n";
  return result;
}

CommandResult cmd_fit_temp(const PipelineConfig& config, const CommandOptions&, std::ostream& log) {
  require_file(config.estimates_path(), "extract");
  const auto estimates = modal::read_estimate_log(config.estimates_path());
  const auto fit = fit_reference_model(estimates, config);
  ensure_dir(config.output_dir);
  tempmodel::write_model(config.model_path(), fit.model);
  const auto& m = fit.model;
  log << "fit-temp: b1=" << text::format_fixed(m.b1, 2) << " b2=" << text::format_fixed(m.b2, 2)
      << " s1=" << text::format_fixed(m.s1, 3) << " s2=" << text::format_fixed(m.s2, 3)
      << " s3=" << text::format_fixed(m.s3, 3) << " level=" << text::format_fixed(m.level, 2) << " (" << m.n_points
      << " points)\n";
  CommandResult result;
  result.outputs = 1;
  if (fit.degenerate) {
    log << "warning: the data do not support a three-segment model\n";
    result.warnings = 1;
  }
  return result;
}

CommandResult cmd_residuals(const PipelineConfig& config, const CommandOptions& options, std::ostream& log) {
  require_file(config.estimates_path(), "extract");
  require_file(config.model_path(), "fit-temp");
  auto estimates = modal::read_estimate_log(config.estimates_path());
  if (options.location) {
    std::erase_if(estimates, [&](const FrequencyEstimate& e) { return e.location_id != *options.location; });
  }
  const TempFreqModel model = tempmodel::read_model(config.model_path());
  std::vector<double> offsets;
  const auto seqs = location_residuals(estimates, model, config.detector.estimation_months, &offsets);
  tempmodel::write_residual_csv(config.residuals_path(), seqs);
  CommandResult result;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    log << "residuals: " << seqs[i].location_id << ": " << seqs[i].size() << " rows, offset "
        << text::format_fixed(offsets[i], 2) << " Hz\n";
    result.outputs += seqs[i].size();
  }
  return result;
}

CommandResult cmd_fit_dist(const PipelineConfig& config, const CommandOptions& options, std::ostream& log) {
  require_file(config.residuals_path(), "residuals");
  const auto seqs = tempmodel::read_residual_csv(config.residuals_path());
  const std::uint64_t seed = options.seed.value_or(config.simulator ? config.simulator->seed : 1);
  std::vector<FitReport> reports;
  CommandResult result;
  for (const auto& seq : seqs) {
    if (!location_selected(options, seq.location_id)) continue;
    for (auto family : {DistributionFamily::Gev, DistributionFamily::Gaussian, DistributionFamily::Weibull3}) {
      try {
        FitReport r = evd::fit_report(seq.values, family);
        r.location_id = seq.location_id;
        if (config.bootstrap_replicates > 0) {
          r.bootstrap_p_value = evd::bootstrap_ks_p_value(seq.values, family, config.bootstrap_replicates, seed);
        }
        reports.push_back(r);
      } catch (const Error& e) {
        log << "warning: " << seq.location_id << " " << family_name(family) << ": " << e.what() << '\n';
        ++result.warnings;
      }
    }
  }
  evd::write_fit_table(config.fit_table_path(), reports);
  for (const auto& r : reports) {
    log << "fit-dist: " << r.location_id << ' ' << family_name(r.family) << " KS p=" << text::format_fixed(r.ks_p_value, 4)
        << '\n';
  }
  result.outputs = reports.size();
  return result;
}

CommandResult cmd_detect(const PipelineConfig& config, const CommandOptions& options, std::ostream& log) {
  require_file(config.residuals_path(), "residuals");
  const auto seqs = tempmodel::read_residual_csv(config.residuals_path());
  if (options.location && std::none_of(seqs.begin(), seqs.end(), [&](const ResidualSequence& s) {
        return s.location_id == *options.location;
      })) {
    throw DataError("no residuals for location '" + *options.location + "'");
  }
  const DetectionRun run = run_detection(seqs, config, options.location);

  ensure_dir(config.output_dir);
  detect::write_detection_log(config.detection_path(), run.reports);
  for (const auto& st : run.states) detect::write_state(config.state_path(st.location_id), st);
  {
    auto out = open_out(config.h0_path());
    out << "index,g\n";
    for (std::size_t i = 0; i < run.h0_statistics.size(); ++i) {
      out << i << ',' << text::format_double(run.h0_statistics[i]) << '\n';
    }
  }

  nlohmann::ordered_json summary;
  summary["pfa"] = config.detector.pfa;
  summary["alpha0g"] = run.calibration.alpha0g;
  summary["gamma_g"] = run.calibration.gamma_g;
  summary["h0_windows"] = run.h0_statistics.size();
  summary["h0_outside_support"] = run.h0_outside_support;
  summary["locations"] = nlohmann::ordered_json::array();
  log << "detect: alpha0g=" << text::format_fixed(run.calibration.alpha0g, 3)
      << " gamma_g=" << text::format_fixed(run.calibration.gamma_g, 3) << " from " << run.h0_statistics.size()
      << " H0 windows\n";
  CommandResult result;
  for (const auto& st : run.states) {
    std::vector<std::string> alarms, withdrawals, indeterminate;
    for (const auto& r : st.history) {
      if (r.indeterminate) indeterminate.push_back(r.window);
      if (r.alarm) alarms.push_back(r.window);
      if (r.withdrawal) withdrawals.push_back(r.window);
    }
    nlohmann::ordered_json loc;
    loc["location_id"] = st.location_id;
    loc["baseline_window"] = st.baseline_window;
    loc["windows"] = st.history.size();
    loc["alarms"] = alarms;
    loc["withdrawals"] = withdrawals;
    loc["indeterminate"] = indeterminate;
    loc["alarm_active"] = st.alarm_active;
    summary["locations"].push_back(loc);
    log << "detect: " << st.location_id << ": " << alarms.size() << " alarm windows, " << withdrawals.size()
        << " withdrawals, " << indeterminate.size() << " indeterminate"
        << (st.alarm_active ? ", alarm active" : "") << '\n';
    result.warnings += indeterminate.size();
  }
  auto out = open_out(config.summary_path());
  out << summary.dump(2) << '\n';
  result.outputs = run.reports.size();
  return result;
}

CommandResult cmd_report(const PipelineConfig& config, const CommandOptions& options, std::ostream& log) {
  require_file(config.residuals_path(), "residuals");
  const auto seqs = tempmodel::read_residual_csv(config.residuals_path());
  const fs::path dir = config.report_dir();
  ensure_dir(dir);
  CommandResult result;

  {
    auto out = open_out(dir / "temp_points.csv");
    out << "location_id,temp_c,median_freq_hz,mad_hz,n\n";
    if (fs::exists(config.estimates_path())) {
      const auto estimates = modal::read_estimate_log(config.estimates_path());
      for (const auto& [id, v] : by_location(estimates)) {
        if (!location_selected(options, id)) continue;
        for (const auto& p : tempmodel::bin_by_temperature(v, config.bins)) {
          out << id << ',' << text::format_double(p.temp_c) << ',' << text::format_double(p.freq_hz) << ','
              << text::format_double(p.mad_hz) << ',' << p.n << '\n';
          ++result.outputs;
        }
      }
    } else {
      log << "warning: no estimate log; temp_points.csv left empty\n";
      ++result.warnings;
    }
  }
  {
    auto out = open_out(dir / "model_curve.csv");
    out << "temp_c,freq_hz\n";
    if (fs::exists(config.model_path())) {
      const TempFreqModel m = tempmodel::read_model(config.model_path());
      const int steps = static_cast<int>(std::lround((m.t_max - m.t_min) / 0.5));
      for (int i = 0; i <= steps; ++i) {
        const double t = m.t_min + (m.t_max - m.t_min) * i / std::max(steps, 1);
        out << text::format_double(t) << ',' << text::format_double(m.evaluate(t)) << '\n';
      }
    }
  }
  {
    auto pp = open_out(dir / "probability_plot.csv");
    pp << "location_id,residual_hz,plotting_position\n";
    auto ac = open_out(dir / "autocorrelation.csv");
    ac << "location_id,lag,acf\n";
    for (const auto& seq : seqs) {
      if (!location_selected(options, seq.location_id)) continue;
      std::vector<double> sorted = seq.values;
      std::sort(sorted.begin(), sorted.end());
      const double n = static_cast<double>(sorted.size());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        pp << seq.location_id << ',' << text::format_double(sorted[i]) << ','
           << text::format_double((static_cast<double>(i) + 0.5) / n) << '\n';
      }
      if (seq.size() >= 2) {
        try {
          const auto r = evd::autocorrelation(seq.values, std::min<std::size_t>(50, seq.size() - 1));
          for (std::size_t k = 0; k < r.size(); ++k) {
            ac << seq.location_id << ',' << k << ',' << text::format_double(r[k]) << '\n';
          }
        } catch (const Error& e) {
          log << "warning: autocorrelation for " << seq.location_id << ": " << e.what() << '\n';
          ++result.warnings;
        }
      }
      result.outputs += sorted.size();
    }
  }
  {
    auto out = open_out(dir / "g_series.csv");
    out << "window,location_id,g,gamma_g,alarm\n";
    if (fs::exists(config.detection_path())) {
      for (const auto& r : detect::read_detection_log(config.detection_path())) {
        if (!location_selected(options, r.location_id)) continue;
        out << r.window << ',' << r.location_id << ','
            << (r.indeterminate ? std::string("nan") : text::format_double(r.g)) << ','
            << text::format_double(r.threshold) << ',' << (r.alarm ? 1 : 0) << '\n';
      }
    } else {
      log << "warning: no detection log; g_series.csv left empty\n";
      ++result.warnings;
    }
  }
  log << "report: wrote bundle to " << dir.string() << '\n';
  return result;
}

}  // namespace railpad::pipeline

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "railpad/error.hpp"
#include "railpad/pipeline.hpp"

using namespace railpad;
using namespace railpad::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

const char* kSmallConfig = R"({
  "paths": {"passage_dir": "passages", "temperature_file": "temperature.csv", "output_dir": "out"},
  "simulator": {
    "months": 4, "trains_per_month": 30, "seed": 3, "freight_fraction": 0.1,
    "locations": [{"id": "A2"}, {"id": "A11", "offset_hz": 6.0}]
  }
})";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

PipelineConfig small_config(const fs::path& dir) { return config_from_json(kSmallConfig, dir); }

}  // namespace

TEST(Config, DefaultsAndSections) {
  const auto c = config_from_json(R"({"detector": {"pfa": 0.05, "calibration": {"scheme": "rolling"}}})", "/base");
  EXPECT_EQ(c.passage_dir, fs::path("/base/passages"));
  EXPECT_EQ(c.detector.pfa, 0.05);
  EXPECT_EQ(c.calibration.scheme, CalibrationScheme::Rolling);
  EXPECT_FALSE(c.simulator);
  const auto s = small_config("/x");
  ASSERT_TRUE(s.simulator);
  EXPECT_EQ(s.simulator->locations.size(), 2u);
  EXPECT_EQ(s.simulator->locations[1].offset_hz, 6.0);
  EXPECT_EQ(s.estimates_path(), fs::path("/x/out/estimates.csv"));
}

TEST(Config, Errors) {
  EXPECT_THROW(config_from_json(R"({"simulator": {"months": 0}})"), ConfigError);
  EXPECT_THROW(config_from_json("{not json"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"detector": {"pfa": 1.5}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"detector": {"pfa": "high"}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"simulator": {"format": "xml"}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"simulator": {"locations": [{"id": "A2"}, {"id": "A2"}]}})"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/railpad.json"), ConfigError);
  std::ostringstream log;
  EXPECT_THROW(cmd_simulate(config_from_json("{}"), {}, log), ConfigError);
}

TEST(Windows, CalendarMonthsIncludingEmpty) {
  ResidualSequence s;
  s.location_id = "A2";
  const char* stamps[] = {"2017-09-03T00:00:00Z", "2017-09-20T00:00:00Z", "2017-11-01T00:00:00Z",
                          "2018-01-31T23:00:00Z"};
  for (const char* t : stamps) {
    s.timestamps.push_back(parse_iso8601(t));
    s.values.push_back(static_cast<double>(s.values.size()));
  }
  const auto w = calendar_windows(s, 0, 1);
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w[0].label, "2017-09");
  EXPECT_EQ(w[0].values, (std::vector<double>{0, 1}));
  EXPECT_TRUE(w[1].values.empty());
  EXPECT_EQ(w[4].label, "2018-01");
  const auto two = calendar_windows(s, 1, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].label, "2017-10");
  EXPECT_EQ(two[0].values, (std::vector<double>{2}));
  EXPECT_THROW(calendar_windows(s, 0, 0), InvalidArgument);
}

TEST(Pipeline, SmallCampaignEndToEnd) {
  TempDir dir("railpad_pipeline_e2e");
  const auto config = small_config(dir.path);
  std::ostringstream log;

  const auto sim = cmd_simulate(config, {}, log);
  const std::size_t per_location = 4 * (30 + 3);
  EXPECT_EQ(sim.outputs, 2 * per_location);
  EXPECT_EQ(line_count(config.manifest_path()), 1 + 2 * per_location);
  EXPECT_EQ(first_line(config.manifest_path()), "path,location_id,timestamp,train_type,true_f2_hz");
  const std::string manifest = slurp(config.manifest_path());

  const auto ex = cmd_extract(config, {}, log);
  const std::size_t skipped_rows = line_count(config.skipped_path()) - 1;
  EXPECT_EQ(ex.outputs + skipped_rows, 2 * per_location);
  EXPECT_EQ(line_count(config.estimates_path()) - 1, ex.outputs);
  // freight passages are screened out, everything else survives
  EXPECT_EQ(ex.outputs, 2 * 4 * 30u);
  EXPECT_EQ(ex.warnings, 0u);

  EXPECT_EQ(cmd_fit_temp(config, {}, log).warnings, 0u);
  cmd_residuals(config, {}, log);
  const auto seqs = tempmodel::read_residual_csv(config.residuals_path());
  ASSERT_EQ(seqs.size(), 2u);
  for (const auto& seq : seqs) {
    for (const auto& m : seq.month_labels()) {
      const auto w = seq.window(m);
      double mean = 0.0;
      for (double v : w) mean += v;
      mean /= static_cast<double>(w.size());
      EXPECT_LT(std::abs(mean), 3.0) << seq.location_id << " " << m;
    }
  }
  EXPECT_EQ(cmd_fit_dist(config, {}, log).outputs, 6u);
  EXPECT_EQ(line_count(config.fit_table_path()), 7u);

  cmd_detect(config, {}, log);
  const std::string detection = slurp(config.detection_path());
  const std::string summary = slurp(config.summary_path());
  const auto sj = nlohmann::json::parse(summary);
  EXPECT_EQ(sj["locations"].size(), 2u);
  EXPECT_GE(sj["h0_windows"].get<int>(), 6);
  for (const auto& loc : sj["locations"]) EXPECT_EQ(loc["windows"].get<int>(), 3);
  const auto det_rows = line_count(config.detection_path()) - 1;
  EXPECT_EQ(det_rows, 6u);

  // identical inputs, identical outputs
  cmd_detect(config, {}, log);
  EXPECT_EQ(slurp(config.detection_path()), detection);
  EXPECT_EQ(slurp(config.summary_path()), summary);

  cmd_report(config, {}, log);
  const fs::path rep = config.report_dir();
  EXPECT_EQ(first_line(rep / "probability_plot.csv"), "location_id,residual_hz,plotting_position");
  EXPECT_EQ(line_count(rep / "probability_plot.csv") - 1, ex.outputs);
  EXPECT_EQ(line_count(rep / "g_series.csv") - 1, det_rows);
  EXPECT_EQ(line_count(rep / "autocorrelation.csv") - 1, 2 * 51u);
  EXPECT_GT(line_count(rep / "temp_points.csv"), 1u);
  {
    std::ifstream in(rep / "probability_plot.csv");
    std::string line;
    std::getline(in, line);
    double prev_r = -INFINITY, prev_p = 0.0;
    std::string prev_loc;
    while (std::getline(in, line)) {
      const auto a = line.find(','), b = line.rfind(',');
      const std::string loc = line.substr(0, a);
      const double r = std::stod(line.substr(a + 1, b - a - 1));
      const double p = std::stod(line.substr(b + 1));
      if (loc == prev_loc) {
        EXPECT_GE(r, prev_r);
        EXPECT_GT(p, prev_p);
      }
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      prev_loc = loc;
      prev_r = r;
      prev_p = p;
    }
  }

  // same seed, same manifest
  fs::remove_all(config.passage_dir);
  cmd_simulate(config, {}, log);
  EXPECT_EQ(slurp(config.manifest_path()), manifest);
  CommandOptions other;
  other.seed = 99;
  cmd_simulate(config, other, log);
  EXPECT_NE(slurp(config.manifest_path()), manifest);
}

TEST(Pipeline, ExtractEdgeCases) {
  TempDir dir("railpad_pipeline_extract");
  auto config = small_config(dir.path);
  std::ostringstream log;
  EXPECT_THROW(cmd_extract(config, {}, log), DataError);

  config.simulator->months = 1;
  config.simulator->trains_per_month = 5;
  config.simulator->locations.resize(1);
  cmd_simulate(config, {}, log);

  // empty passage directory: empty log and a warning
  const fs::path empty_dir = dir.path / "empty";
  fs::create_directories(empty_dir);
  auto empty_cfg = config;
  empty_cfg.passage_dir = empty_dir;
  const auto e = cmd_extract(empty_cfg, {}, log);
  EXPECT_EQ(e.outputs, 0u);
  EXPECT_GE(e.warnings, 1u);
  EXPECT_EQ(line_count(empty_cfg.estimates_path()), 1u);

  // corrupt file: logged skip and a warning
  {
    std::ofstream bad(config.passage_dir / "A2" / "A2_broken.bin", std::ios::binary);
    bad << "not a passage";
  }
  const auto r = cmd_extract(config, {}, log);
  EXPECT_EQ(r.outputs, 5u);
  EXPECT_EQ(r.warnings, 1u);
  EXPECT_NE(slurp(config.skipped_path()).find("A2_broken.bin"), std::string::npos);
}

TEST(Pipeline, MissingUpstreamNamesStage) {
  TempDir dir("railpad_pipeline_missing");
  const auto config = small_config(dir.path);
  std::ostringstream log;
  EXPECT_THROW(cmd_fit_temp(config, {}, log), DataError);
  fs::create_directories(config.output_dir);
  modal::write_estimate_log(config.estimates_path(), std::vector<FrequencyEstimate>{});
  try {
    cmd_residuals(config, {}, log);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("fit-temp"), std::string::npos) << e.what();
  }
  EXPECT_THROW(cmd_detect(config, {}, log), DataError);
}

TEST(Pipeline, ReportOnEmptyResiduals) {
  TempDir dir("railpad_pipeline_report");
  const auto config = small_config(dir.path);
  fs::create_directories(config.output_dir);
  tempmodel::write_residual_csv(config.residuals_path(), std::vector<ResidualSequence>{});
  std::ostringstream log;
  cmd_report(config, {}, log);
  const fs::path rep = config.report_dir();
  EXPECT_EQ(line_count(rep / "probability_plot.csv"), 1u);
  EXPECT_EQ(line_count(rep / "autocorrelation.csv"), 1u);
  EXPECT_EQ(line_count(rep / "g_series.csv"), 1u);
  EXPECT_EQ(first_line(rep / "g_series.csv"), "window,location_id,g,gamma_g,alarm");
  EXPECT_EQ(first_line(rep / "temp_points.csv"), "location_id,temp_c,median_freq_hz,mad_hz,n");
}

TEST(Cli, ExitCodes) {
  TempDir dir("railpad_cli");
  const fs::path cfg = dir.path / "config.json";
  {
    std::ofstream out(cfg);
    out << R"({"paths": {"passage_dir": "p", "temperature_file": "t.csv", "output_dir": "o"},
              "simulator": {"months": 1, "trains_per_month": 3, "freight_fraction": 0}})";
  }
  const fs::path bad = dir.path / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"detector": {"pfa": 2}})";
  }
  auto run = [](const std::string& args) {
    const std::string cmd = std::string("\"") + RAILPAD_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("simulate --config " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(dir.path / "p" / "manifest.csv"));
  EXPECT_EQ(run("simulate --config " + cfg.string() + " --seed 5 --location A2"), 0);
  EXPECT_EQ(run("detect --config " + cfg.string()), 2);
  EXPECT_EQ(run("detect --config " + bad.string()), 1);
  EXPECT_EQ(run("simulate --config " + cfg.string() + " --location Z9"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("extract"), 1);
}

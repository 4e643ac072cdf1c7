#include "railpad/tempmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <json.hpp>

#include "railpad/error.hpp"
#include "railpad/modal.hpp"
#include "railpad/optimize.hpp"
#include "railpad/stats.hpp"
#include "railpad/text.hpp"

namespace railpad {

TempFreqModel TempFreqModel::from_segment_lines(double s1, double intercept1, double level, double s3,
                                                double intercept3) {
  if (s1 == 0.0 || s3 == 0.0) throw InvalidArgument("from_segment_lines: outer slopes must be nonzero");
  TempFreqModel m;
  m.s1 = s1;
  m.s3 = s3;
  m.level = level;
  m.b1 = (level - intercept1) / s1;
  m.b2 = (level - intercept3) / s3;
  m.validate();
  return m;
}

double TempFreqModel::shape(double temp_c) const {
  const double t = std::clamp(temp_c, t_min, t_max);
  if (t <= b1) return level + s1 * (t - b1);
  if (t <= b2) return level + s2 * (t - b1);
  return level + s2 * (b2 - b1) + s3 * (t - b2);
}

double TempFreqModel::evaluate(double temp_c) const { return shape(temp_c) + y_offset; }

void TempFreqModel::validate() const {
  if (!(b1 < b2)) throw InvalidArgument("temperature model: breakpoints must satisfy b1 < b2");
  if (!(t_min < t_max)) throw InvalidArgument("temperature model: empty valid range");
  if (!std::isfinite(level) || !std::isfinite(s1) || !std::isfinite(s2) || !std::isfinite(s3) ||
      !std::isfinite(y_offset)) {
    throw InvalidArgument("temperature model: non-finite coefficient");
  }
}

TempFreqModel nominal_railpad_map() { return TempFreqModel::from_segment_lines(-5.9, 597.8, 578.8, -5.3, 681.7); }

std::vector<std::string> ResidualSequence::month_labels() const {
  std::vector<std::string> out;
  for (const auto& m : months) {
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> ResidualSequence::window(const std::string& month) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (months[i] == month) out.push_back(values[i]);
  }
  return out;
}

namespace tempmodel {

std::vector<TempFreqPoint> bin_by_temperature(std::span<const FrequencyEstimate> estimates, const BinOptions& options) {
  if (estimates.empty()) throw InvalidArgument("bin_by_temperature: no estimates");
  if (options.n_bins == 0 || !(options.t_min < options.t_max)) throw InvalidArgument("bin_by_temperature: bad bins");
  const double width = (options.t_max - options.t_min) / static_cast<double>(options.n_bins);
  std::vector<std::vector<double>> bins(options.n_bins);
  std::vector<double> temp_sum(options.n_bins, 0.0);
  for (const auto& e : estimates) {
    auto idx = static_cast<long long>(std::floor((e.temp_c - options.t_min) / width));
    idx = std::clamp<long long>(idx, 0, static_cast<long long>(options.n_bins) - 1);
    bins[static_cast<std::size_t>(idx)].push_back(e.value_hz);
    temp_sum[static_cast<std::size_t>(idx)] += e.temp_c;
  }
  std::vector<TempFreqPoint> points;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].empty()) continue;
    TempFreqPoint p;
    p.temp_c = temp_sum[b] / static_cast<double>(bins[b].size());
    p.freq_hz = stats::median(bins[b]);
    p.mad_hz = stats::mad(bins[b]);
    p.n = bins[b].size();
    points.push_back(p);
  }
  return points;
}

namespace {

struct LineFit {
  double level, s1, s2, s3, rss;
};

// Linear least squares for fixed breakpoints.
LineFit solve_for_breakpoints(std::span<const TempFreqPoint> pts, double b1, double b2, bool free_middle) {
  const int k = free_middle ? 4 : 3;
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d aty = Eigen::Vector4d::Zero();
  Eigen::Vector4d row;
  for (const auto& p : pts) {
    const double t = p.temp_c;
    row << 1.0, std::min(t - b1, 0.0), std::max(t - b2, 0.0), std::clamp(t - b1, 0.0, b2 - b1);
    ata += row * row.transpose();
    aty += row * p.freq_hz;
  }
  Eigen::Vector4d coef = Eigen::Vector4d::Zero();
  coef.head(k) = ata.topLeftCorner(k, k).ldlt().solve(aty.head(k));
  double rss = 0.0;
  for (const auto& p : pts) {
    const double t = p.temp_c;
    row << 1.0, std::min(t - b1, 0.0), std::max(t - b2, 0.0), std::clamp(t - b1, 0.0, b2 - b1);
    const double r = p.freq_hz - row.dot(coef);
    rss += r * r;
  }
  return {coef(0), coef(1), coef(3), coef(2), rss};
}

}  // namespace

PiecewiseFit fit_piecewise(std::span<const TempFreqPoint> points, const FitOptions& options) {
  if (points.size() < 6) throw InvalidArgument("fit_piecewise: need at least 6 points");
  std::vector<double> temps;
  for (const auto& p : points) temps.push_back(p.temp_c);
  const double lo = stats::percentile(temps, options.lower_percentile);
  const double hi = stats::percentile(temps, options.upper_percentile);

  auto admissible = [&](double b1, double b2) {
    if (!(b1 < b2) || b1 < lo || b2 > hi) return false;
    std::size_t left = 0, right = 0;
    for (double t : temps) {
      left += t < b1;
      right += t > b2;
    }
    return left >= options.min_outer_points && right >= options.min_outer_points;
  };

  double best_rss = std::numeric_limits<double>::infinity();
  double best_b1 = 0.0, best_b2 = 0.0;
  const auto steps = static_cast<int>(std::floor((hi - lo) / options.grid_step_c + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double b1 = lo + i * options.grid_step_c;
    for (int j = i + 1; j <= steps; ++j) {
      const double b2 = lo + j * options.grid_step_c;
      if (!admissible(b1, b2)) continue;
      const auto fit = solve_for_breakpoints(points, b1, b2, options.free_middle_slope);
      if (fit.rss < best_rss) {
        best_rss = fit.rss;
        best_b1 = b1;
        best_b2 = b2;
      }
    }
  }
  if (!std::isfinite(best_rss)) {
    throw InvalidArgument("fit_piecewise: points do not span two breakpoints with outer segments");
  }

  // Continuous refinement below the grid resolution.
  optimize::NelderMeadOptions nm;
  nm.f_tolerance = 1e-15;
  nm.x_tolerance = 1e-12;
  const auto refined = optimize::nelder_mead(
      [&](std::span<const double> b) {
        if (!admissible(b[0], b[1])) return std::numeric_limits<double>::infinity();
        return solve_for_breakpoints(points, b[0], b[1], options.free_middle_slope).rss;
      },
      {best_b1, best_b2}, {0.5 * options.grid_step_c, 0.5 * options.grid_step_c}, nm);
  if (refined.f <= best_rss) {
    best_b1 = refined.x[0];
    best_b2 = refined.x[1];
  }

  const auto fit = solve_for_breakpoints(points, best_b1, best_b2, options.free_middle_slope);
  PiecewiseFit out;
  out.model.b1 = best_b1;
  out.model.b2 = best_b2;
  out.model.level = fit.level;
  out.model.s1 = fit.s1;
  out.model.s2 = fit.s2;
  out.model.s3 = fit.s3;
  out.model.fit_rss = fit.rss;
  out.model.n_points = points.size();
  std::size_t middle = 0;
  for (double t : temps) middle += (t > best_b1 && t <= best_b2);
  out.degenerate = middle < 2 || (std::abs(fit.s1) < 1e-3 && std::abs(fit.s3) < 1e-3);
  return out;
}

TempFreqModel shift_to_location(const TempFreqModel& model, std::span<const FrequencyEstimate> target) {
  if (target.empty()) throw InvalidArgument("shift_to_location: no target estimates");
  double acc = 0.0;
  for (const auto& e : target) acc += e.value_hz - model.shape(e.temp_c);
  TempFreqModel shifted = model;
  shifted.y_offset = acc / static_cast<double>(target.size());
  return shifted;
}

double evaluate(const TempFreqModel& model, double temp_c) { return model.evaluate(temp_c); }

ResidualSequence residuals(std::span<const FrequencyEstimate> estimates, const TempFreqModel& model) {
  ResidualSequence seq;
  for (const auto& e : estimates) {
    if (!std::isfinite(e.temp_c)) {
      throw DataError("residuals: estimate at " + format_iso8601(e.timestamp) + " has no temperature assignment");
    }
    if (seq.location_id.empty()) seq.location_id = e.location_id;
    seq.values.push_back(e.value_hz - model.evaluate(e.temp_c));
    seq.timestamps.push_back(e.timestamp);
    seq.temps_c.push_back(e.temp_c);
    seq.months.push_back(month_label(e.timestamp));
  }
  return seq;
}

void write_model(const std::filesystem::path& path, const TempFreqModel& model) {
  nlohmann::ordered_json j;
  j["s1"] = model.s1;
  j["s2"] = model.s2;
  j["s3"] = model.s3;
  j["c"] = model.level;
  j["b1"] = model.b1;
  j["b2"] = model.b2;
  j["y_offset"] = model.y_offset;
  j["valid_range"] = {model.t_min, model.t_max};
  j["fit_rss"] = model.fit_rss;
  j["n_points"] = model.n_points;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << j.dump(2) << '\n';
}

TempFreqModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    TempFreqModel m;
    m.s1 = j.at("s1").get<double>();
    m.s2 = j.value("s2", 0.0);
    m.s3 = j.at("s3").get<double>();
    m.level = j.at("c").get<double>();
    m.b1 = j.at("b1").get<double>();
    m.b2 = j.at("b2").get<double>();
    m.y_offset = j.value("y_offset", 0.0);
    if (j.contains("valid_range")) {
      m.t_min = j["valid_range"].at(0).get<double>();
      m.t_max = j["valid_range"].at(1).get<double>();
    }
    m.fit_rss = j.value("fit_rss", 0.0);
    m.n_points = j.value("n_points", std::size_t{0});
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_residual_csv(const std::filesystem::path& path, std::span<const ResidualSequence> sequences) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write residual log " + path.string());
  out << "timestamp,location_id,residual_hz,temp_c\n";
  for (const auto& s : sequences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << format_iso8601(s.timestamps[i]) << ',' << s.location_id << ',' << text::format_double(s.values[i])
          << ',' << text::format_double(s.temps_c[i]) << '\n';
    }
  }
}

std::vector<ResidualSequence> read_residual_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open residual log " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "timestamp,location_id,residual_hz,temp_c") {
    throw DataError(path.string() + ": not a residual log");
  }
  std::vector<ResidualSequence> out;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto f = text::split(text::trim(line), ',');
    if (f.size() != 4) throw DataError(path.string() + ": malformed residual row");
    const std::string loc(f[1]);
    auto it = index.find(loc);
    if (it == index.end()) {
      it = index.emplace(loc, out.size()).first;
      out.push_back({});
      out.back().location_id = loc;
    }
    auto& s = out[it->second];
    const auto ts = parse_iso8601(f[0]);
    s.timestamps.push_back(ts);
    s.values.push_back(text::parse_double(f[2]));
    s.temps_c.push_back(text::parse_double(f[3]));
    s.months.push_back(month_label(ts));
  }
  return out;
}

}  // namespace tempmodel
}  // namespace railpad

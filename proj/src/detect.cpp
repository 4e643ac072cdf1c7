#include "railpad/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "railpad/error.hpp"
#include "railpad/text.hpp"

namespace railpad {

void DetectorSettings::validate() const {
  if (!(pfa > 0.0 && pfa < 1.0)) throw InvalidArgument("detector: P_FA must lie in (0, 1)");
  if (estimation_months < 1 || detection_months < 1) throw InvalidArgument("detector: window lengths must be >= 1 month");
  if (min_window < 3) throw InvalidArgument("detector: min_window must be at least 3");
}

namespace detect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_in_support(std::span<const double> r, const GevParams& p) {
  return std::all_of(r.begin(), r.end(), [&](double v) { return p.in_support(v); });
}

}  // namespace

double threshold(double alpha0g, double pfa) {
  if (!(alpha0g > 0.0)) throw InvalidArgument("threshold: alpha0g must be positive");
  if (!(pfa > 0.0 && pfa < 1.0)) throw InvalidArgument("threshold: P_FA must lie in (0, 1)");
  return -std::log(pfa) * alpha0g;
}

Calibration calibrate(std::span<const double> h0_statistics, double pfa) {
  if (h0_statistics.size() < kMinCalibrationWindows) {
    throw InvalidArgument("calibrate: need at least " + std::to_string(kMinCalibrationWindows) + " H0 windows, got " +
                          std::to_string(h0_statistics.size()));
  }
  double acc = 0.0;
  for (double g : h0_statistics) {
    if (!std::isfinite(g) || g < -1e-8) throw InvalidArgument("calibrate: H0 statistics must be finite and nonnegative");
    acc += std::max(g, 0.0);
  }
  Calibration c;
  c.alpha0g = acc / static_cast<double>(h0_statistics.size());
  c.gamma_g = threshold(c.alpha0g, pfa);
  c.n_windows = h0_statistics.size();
  return c;
}

double glrt_terms(std::span<const double> r, const GevParams& th, const GevParams& t0) {
  th.validate();
  t0.validate();
  const double n = static_cast<double>(r.size());
  double log_hat = 0.0, log_0 = 0.0, pow_hat = 0.0, pow_0 = 0.0;
  for (double v : r) {
    const double a = 1.0 + th.xi * (v - th.mu) / th.sigma;
    const double b = 1.0 + t0.xi * (v - t0.mu) / t0.sigma;
    if (!(b > 0.0)) return kInf;
    if (!(a > 0.0)) return -kInf;
    log_hat += std::log(a);
    log_0 += std::log(b);
    pow_hat += std::pow(a, -1.0 / th.xi);
    pow_0 += std::pow(b, -1.0 / t0.xi);
  }
  return n * std::log(t0.sigma / th.sigma) - (1.0 + 1.0 / th.xi) * log_hat + (1.0 + 1.0 / t0.xi) * log_0 - pow_hat +
         pow_0;
}

GlrtResult glrt_statistic(std::span<const double> window, const GevParams& theta0, const evd::GevFitOptions& options) {
  theta0.validate();
  GlrtResult out;
  out.outside_support = !all_in_support(window, theta0);
  const GevParams starts[] = {theta0};
  const auto fit = evd::fit_gev(window, options, starts);
  out.theta_hat = fit.params;
  if (out.outside_support) {
    out.g = kInf;
    out.g_direct = kInf;
    return out;
  }
  out.g = glrt_terms(window, fit.params, theta0);
  out.g_direct = fit.loglik - evd::gev_loglik(window, theta0);
  return out;
}

DetectorState initialize(std::string location_id, std::string baseline_window, std::span<const double> residuals,
                         const DetectorSettings& settings) {
  settings.validate();
  if (residuals.empty()) throw InvalidArgument("initialize: empty estimation window");
  DetectorState s;
  s.location_id = std::move(location_id);
  s.settings = settings;
  s.baseline_window = std::move(baseline_window);
  s.theta0 = evd::fit_gev(residuals).params;
  return s;
}

void apply_calibration(DetectorState& state, const Calibration& calibration) {
  if (!(calibration.alpha0g > 0.0)) throw InvalidArgument("apply_calibration: alpha0g must be positive");
  state.alpha0g = calibration.alpha0g;
  state.gamma_g = threshold(calibration.alpha0g, state.settings.pfa);
}

void reinitialize(DetectorState& state, std::string baseline_window, std::span<const double> residuals) {
  if (residuals.empty()) throw InvalidArgument("reinitialize: empty estimation window");
  state.theta0 = evd::fit_gev(residuals).params;
  state.baseline_window = std::move(baseline_window);
  state.history.clear();
  state.alarm_active = false;
}

DetectionReport step(DetectorState& state, const std::string& window_label, std::span<const double> window) {
  if (!state.calibrated()) throw InvalidArgument("step: detector is not calibrated");
  DetectionReport rep;
  rep.window = window_label;
  rep.location_id = state.location_id;
  rep.threshold = state.gamma_g;
  rep.n_samples = window.size();
  if (window.size() < state.settings.min_window) {
    rep.indeterminate = true;
    rep.g = std::nan("");
    rep.message = "window has " + std::to_string(window.size()) + " residuals, fewer than " +
                  std::to_string(state.settings.min_window);
    return rep;
  }
  try {
    const auto res = glrt_statistic(window, state.theta0);
    rep.g = res.g;
    rep.theta_hat = res.theta_hat;
    if (res.outside_support) rep.message = "residual outside H0 support";
  } catch (const Error& e) {
    rep.indeterminate = true;
    rep.g = std::nan("");
    rep.message = e.what();
    return rep;
  }
  rep.alarm = rep.g > state.gamma_g;
  rep.withdrawal = state.alarm_active && !rep.alarm;
  state.alarm_active = rep.alarm;
  state.history.push_back(rep);
  return rep;
}

std::vector<double> rolling_h0_statistics(std::span<const double> residuals, const GevParams& theta0,
                                          std::size_t window, std::size_t stride) {
  if (window < 3 || stride < 1) throw InvalidArgument("rolling_h0_statistics: bad window or stride");
  std::vector<double> out;
  for (std::size_t start = 0; start + window <= residuals.size(); start += stride) {
    try {
      const auto res = glrt_statistic(residuals.subspan(start, window), theta0);
      if (std::isfinite(res.g)) out.push_back(std::max(res.g, 0.0));
    } catch (const Error&) {
    }
  }
  return out;
}

double iid_threshold(const GevParams& theta0, std::size_t n, double pfa, int replicates, std::uint64_t seed) {
  if (replicates < 10) throw InvalidArgument("iid_threshold: need at least 10 replicates");
  if (!(pfa > 0.0 && pfa < 1.0)) throw InvalidArgument("iid_threshold: P_FA must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<double> g;
  for (int i = 0; i < replicates; ++i) {
    const auto w = evd::gev_sample(n, theta0, rng);
    try {
      g.push_back(glrt_statistic(w, theta0).g);
    } catch (const Error&) {
    }
  }
  if (g.empty()) throw EstimationError("iid_threshold: every replicate failed");
  std::sort(g.begin(), g.end());
  const auto idx = std::min(g.size() - 1, static_cast<std::size_t>(std::ceil((1.0 - pfa) * g.size())) - 1);
  return g[idx];
}

double detection_probability(const GevParams& theta0, const GevParams& theta1, std::size_t n, double gamma,
                             int replicates, std::uint64_t seed) {
  if (replicates < 1) throw InvalidArgument("detection_probability: replicates must be positive");
  std::mt19937_64 rng(seed);
  int hits = 0, used = 0;
  for (int i = 0; i < replicates; ++i) {
    const auto w = evd::gev_sample(n, theta1, rng);
    try {
      hits += glrt_statistic(w, theta0).g > gamma;
      ++used;
    } catch (const Error&) {
    }
  }
  if (used == 0) throw EstimationError("detection_probability: every replicate failed");
  return static_cast<double>(hits) / used;
}

namespace {

nlohmann::ordered_json params_json(const GevParams& p) { return {{"mu", p.mu}, {"sigma", p.sigma}, {"xi", p.xi}}; }

GevParams params_from(const nlohmann::json& j) {
  return {j.at("mu").get<double>(), j.at("sigma").get<double>(), j.at("xi").get<double>()};
}

// JSON has no infinity or NaN.
nlohmann::ordered_json number_json(double v) {
  if (std::isfinite(v)) return v;
  return text::format_double(v);
}

double number_from(const nlohmann::json& j) {
  if (j.is_string()) return text::parse_double(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

void write_state(const std::filesystem::path& path, const DetectorState& state) {
  nlohmann::ordered_json j;
  j["location_id"] = state.location_id;
  j["baseline_window"] = state.baseline_window;
  j["theta0"] = params_json(state.theta0);
  j["alpha0g"] = state.alpha0g;
  j["gamma_g"] = state.gamma_g;
  j["settings"] = {{"pfa", state.settings.pfa},
                   {"estimation_months", state.settings.estimation_months},
                   {"detection_months", state.settings.detection_months},
                   {"min_window", state.settings.min_window}};
  j["alarm_active"] = state.alarm_active;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& r : state.history) {
    nlohmann::ordered_json h;
    h["window"] = r.window;
    h["g"] = number_json(r.g);
    h["threshold"] = r.threshold;
    h["alarm"] = r.alarm;
    h["withdrawal"] = r.withdrawal;
    h["n_samples"] = r.n_samples;
    if (r.theta_hat) h["theta_hat"] = params_json(*r.theta_hat);
    if (!r.message.empty()) h["message"] = r.message;
    hist.push_back(h);
  }
  j["history"] = hist;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write detector state " + path.string());
  out << j.dump(2) << '\n';
}

DetectorState read_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detector state " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    DetectorState s;
    s.location_id = j.at("location_id").get<std::string>();
    s.baseline_window = j.value("baseline_window", std::string{});
    s.theta0 = params_from(j.at("theta0"));
    s.alpha0g = j.at("alpha0g").get<double>();
    s.gamma_g = j.at("gamma_g").get<double>();
    const auto& st = j.at("settings");
    s.settings.pfa = st.at("pfa").get<double>();
    s.settings.estimation_months = st.at("estimation_months").get<int>();
    s.settings.detection_months = st.at("detection_months").get<int>();
    s.settings.min_window = st.at("min_window").get<std::size_t>();
    s.alarm_active = j.value("alarm_active", false);
    for (const auto& h : j.at("history")) {
      DetectionReport r;
      r.location_id = s.location_id;
      r.window = h.at("window").get<std::string>();
      r.g = number_from(h.at("g"));
      r.threshold = h.at("threshold").get<double>();
      r.alarm = h.at("alarm").get<bool>();
      r.withdrawal = h.at("withdrawal").get<bool>();
      r.n_samples = h.at("n_samples").get<std::size_t>();
      if (h.contains("theta_hat")) r.theta_hat = params_from(h["theta_hat"]);
      r.message = h.value("message", std::string{});
      s.history.push_back(std::move(r));
    }
    s.settings.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_detection_log(const std::filesystem::path& path, std::span<const DetectionReport> reports) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write detection log " + path.string());
  out << "window,location_id,g,gamma_g,alarm,withdrawal,n_samples,mu_hat,sigma_hat,xi_hat\n";
  for (const auto& r : reports) {
    out << r.window << ',' << r.location_id << ',' << text::format_double(r.g) << ','
        << text::format_double(r.threshold) << ',' << (r.alarm ? 1 : 0) << ',' << (r.withdrawal ? 1 : 0) << ','
        << r.n_samples;
    if (r.theta_hat) {
      out << ',' << text::format_double(r.theta_hat->mu) << ',' << text::format_double(r.theta_hat->sigma) << ','
          << text::format_double(r.theta_hat->xi);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

std::vector<DetectionReport> read_detection_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detection log " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      text::trim(line) != "window,location_id,g,gamma_g,alarm,withdrawal,n_samples,mu_hat,sigma_hat,xi_hat") {
    throw DataError(path.string() + ": not a detection log");
  }
  std::vector<DetectionReport> out;
  while (std::getline(in, line)) {
    const auto row = text::trim(line);
    if (row.empty()) continue;
    const auto f = text::split(row, ',');
    if (f.size() != 10) throw DataError(path.string() + ": malformed detection row");
    DetectionReport r;
    r.window = std::string(f[0]);
    r.location_id = std::string(f[1]);
    r.g = text::parse_double(f[2]);
    r.threshold = text::parse_double(f[3]);
    r.alarm = text::parse_int(f[4]) != 0;
    r.withdrawal = text::parse_int(f[5]) != 0;
    r.n_samples = static_cast<std::size_t>(text::parse_int(f[6]));
    r.indeterminate = std::isnan(r.g);
    if (!f[7].empty()) {
      r.theta_hat = GevParams{text::parse_double(f[7]), text::parse_double(f[8]), text::parse_double(f[9])};
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detect
}  // namespace railpad

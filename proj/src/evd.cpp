#include "railpad/evd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "railpad/error.hpp"
#include "railpad/stats.hpp"
#include "railpad/text.hpp"

namespace railpad {

void GevParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("GEV: sigma must be positive");
  if (xi == 0.0 || !std::isfinite(xi) || !std::isfinite(mu)) throw InvalidArgument("GEV: xi must be finite and nonzero");
}

std::string family_name(DistributionFamily family) {
  switch (family) {
    case DistributionFamily::Gev: return "GEV";
    case DistributionFamily::Gaussian: return "Gaussian";
    case DistributionFamily::Weibull3: return "Weibull3";
  }
  return "unknown";
}

namespace evd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_xi(double xi) {
  if (std::abs(xi) < kMinAbsXi) return std::copysign(kMinAbsXi, xi);
  return xi;
}

}  // namespace

double gev_pdf(double r, const GevParams& p) {
  p.validate();
  const double t = 1.0 + p.xi * (r - p.mu) / p.sigma;
  if (!(t > 0.0)) return 0.0;
  const double lt = std::log(t);
  return std::exp(-(1.0 + 1.0 / p.xi) * lt - std::exp(-lt / p.xi)) / p.sigma;
}

double gev_cdf(double r, const GevParams& p) {
  p.validate();
  const double t = 1.0 + p.xi * (r - p.mu) / p.sigma;
  if (!(t > 0.0)) return p.xi < 0.0 ? 1.0 : 0.0;
  return std::exp(-std::pow(t, -1.0 / p.xi));
}

double gev_quantile(double prob, const GevParams& p) {
  p.validate();
  if (!(prob > 0.0 && prob < 1.0)) throw InvalidArgument("gev_quantile: probability must lie in (0, 1)");
  return p.mu + p.sigma / p.xi * (std::pow(-std::log(prob), -p.xi) - 1.0);
}

double gev_loglik(std::span<const double> data, const GevParams& p) {
  p.validate();
  double sum_log = 0.0, sum_pow = 0.0;
  for (double r : data) {
    const double t = 1.0 + p.xi * (r - p.mu) / p.sigma;
    if (!(t > 0.0)) return -kInf;
    const double lt = std::log(t);
    sum_log += lt;
    sum_pow += std::exp(-lt / p.xi);
  }
  return -static_cast<double>(data.size()) * std::log(p.sigma) - (1.0 + 1.0 / p.xi) * sum_log - sum_pow;
}

std::vector<double> gev_sample(std::size_t n, const GevParams& p, std::mt19937_64& rng) {
  p.validate();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    v = gev_quantile(u, p);
  }
  return out;
}

GevParams gev_pwm(std::span<const double> data) {
  const std::size_t n = data.size();
  if (n < 3) throw EstimationError("gev_pwm: need at least 3 samples");
  std::vector<double> x(data.begin(), data.end());
  std::sort(x.begin(), x.end());
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double j = static_cast<double>(i);
    b0 += x[i];
    b1 += j / (nn - 1.0) * x[i];
    b2 += j * (j - 1.0) / ((nn - 1.0) * (nn - 2.0)) * x[i];
  }
  b0 /= nn;
  b1 /= nn;
  b2 /= nn;
  const double denom = 3.0 * b2 - b0;
  if (denom == 0.0) throw EstimationError("gev_pwm: degenerate moments");
  const double c = (2.0 * b1 - b0) / denom - std::log(2.0) / std::log(3.0);
  const double k = 7.8590 * c + 2.9554 * c * c;
  if (!std::isfinite(k) || std::abs(k) < 1e-6 || k <= -1.0 + 1e-6) throw EstimationError("gev_pwm: shape out of range");
  const double g = std::tgamma(1.0 + k);
  const double sigma = (2.0 * b1 - b0) * k / (g * (1.0 - std::pow(2.0, -k)));
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw EstimationError("gev_pwm: nonpositive scale");
  GevParams p;
  p.sigma = sigma;
  p.mu = b0 + sigma * (g - 1.0) / k;
  p.xi = clamp_xi(-k);
  return p;
}

GevFit fit_gev(std::span<const double> data, const GevFitOptions& options, std::span<const GevParams> extra_starts) {
  if (data.size() < 3) throw InvalidArgument("fit_gev: need at least 3 samples");
  for (double v : data) {
    if (!std::isfinite(v)) throw InvalidArgument("fit_gev: non-finite sample");
  }
  const double spread = std::sqrt(stats::variance(data));
  if (!(spread > 0.0)) throw DegenerateInput("fit_gev: constant data (scale collapses to zero)");

  auto objective = [&](std::span<const double> x) {
    if (!(x[2] > options.xi_lower)) return kInf;
    const GevParams p{x[0], std::exp(x[1]), clamp_xi(x[2])};
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) return kInf;
    return -gev_loglik(data, p);
  };
  // Widen the scale until every sample lies inside the support.
  auto make_feasible = [&](GevParams p) {
    p.xi = clamp_xi(std::max(p.xi, options.xi_lower + 0.05));
    for (int i = 0; i < 80 && !std::isfinite(gev_loglik(data, p)); ++i) p.sigma *= 1.5;
    return p;
  };

  std::vector<GevParams> starts;
  try {
    starts.push_back(make_feasible(gev_pwm(data)));
  } catch (const EstimationError&) {
  }
  double scale = 1.4826 * stats::mad(data);
  if (!(scale > 0.0)) scale = spread;
  starts.push_back(make_feasible({stats::median(data), scale, -0.1}));
  for (const auto& s : extra_starts) {
    if (s.sigma > 0.0 && std::isfinite(gev_loglik(data, s))) starts.push_back(s);
  }

  GevFit fit;
  fit.initial = starts.front();
  fit.initial_loglik = gev_loglik(data, fit.initial);
  fit.low_confidence = data.size() < kMinSamples;

  double best = kInf;
  bool converged = false;
  for (const auto& s : starts) {
    if (!std::isfinite(gev_loglik(data, s))) continue;
    const auto res = optimize::nelder_mead(objective, {s.mu, std::log(s.sigma), s.xi},
                                           {0.2 * s.sigma, 0.2, 0.1}, options.optimizer);
    fit.evaluations += res.evaluations;
    if (res.f < best) {
      best = res.f;
      fit.params = {res.x[0], std::exp(res.x[1]), clamp_xi(res.x[2])};
      converged = res.converged;
    }
  }
  if (!std::isfinite(best)) throw EstimationError("fit_gev: no feasible starting point");
  if (!converged) throw EstimationError("fit_gev: optimizer did not converge");
  fit.loglik = -best;
  return fit;
}

double normal_cdf(double x, const GaussianParams& p) {
  return 0.5 * std::erfc(-(x - p.mean) / (p.sd * std::numbers::sqrt2));
}

double normal_pdf(double x, const GaussianParams& p) {
  const double z = (x - p.mean) / p.sd;
  return std::exp(-0.5 * z * z) / (p.sd * std::sqrt(2.0 * std::numbers::pi));
}

GaussianParams fit_gaussian_params(std::span<const double> data) {
  if (data.empty()) throw InvalidArgument("fit_gaussian: empty data");
  const double sd = std::sqrt(stats::variance(data));
  if (!(sd > 0.0)) throw DegenerateInput("fit_gaussian: constant data");
  return {stats::mean(data), sd};
}

double weibull3_pdf(double x, const Weibull3Params& p) {
  if (x <= p.location) return 0.0;
  const double z = (x - p.location) / p.scale;
  return p.shape / p.scale * std::pow(z, p.shape - 1.0) * std::exp(-std::pow(z, p.shape));
}

double weibull3_cdf(double x, const Weibull3Params& p) {
  if (x <= p.location) return 0.0;
  return -std::expm1(-std::pow((x - p.location) / p.scale, p.shape));
}

double weibull3_loglik(std::span<const double> data, const Weibull3Params& p) {
  double acc = 0.0;
  for (double x : data) {
    if (x <= p.location) return -kInf;
    const double z = (x - p.location) / p.scale;
    acc += std::log(p.shape / p.scale) + (p.shape - 1.0) * std::log(z) - std::pow(z, p.shape);
  }
  return acc;
}

std::vector<double> weibull3_sample(std::size_t n, const Weibull3Params& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    v = p.location + p.scale * std::pow(-std::log(u), 1.0 / p.shape);
  }
  return out;
}

namespace {

struct WeibullInner {
  double shape, scale, loglik;
};

// Two-parameter MLE for positive y.
WeibullInner weibull2_mle(std::span<const double> log_y) {
  const double n = static_cast<double>(log_y.size());
  const double log_max = *std::max_element(log_y.begin(), log_y.end());
  double mean_log = 0.0;
  for (double l : log_y) mean_log += l;
  mean_log /= n;
  auto score = [&](double k) {
    double s0 = 0.0, s1 = 0.0;
    for (double l : log_y) {
      const double w = std::exp(k * (l - log_max));
      s0 += w;
      s1 += w * l;
    }
    return s1 / s0 - 1.0 / k - mean_log;
  };
  double lo = std::log(1e-3), hi = std::log(1e4);
  if (score(std::exp(hi)) < 0.0) {
    lo = hi;
  } else {
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (score(std::exp(mid)) < 0.0) lo = mid; else hi = mid;
    }
  }
  const double k = std::exp(0.5 * (lo + hi));
  double s0 = 0.0;
  for (double l : log_y) s0 += std::exp(k * (l - log_max));
  const double log_scale = log_max + std::log(s0 / n) / k;
  double sum_log = 0.0;
  for (double l : log_y) sum_log += l;
  const double ll = n * std::log(k) - n * k * log_scale + (k - 1.0) * sum_log - n;
  return {k, std::exp(log_scale), ll};
}

}  // namespace

Weibull3Params fit_weibull3_params(std::span<const double> data) {
  if (data.size() < 3) throw InvalidArgument("fit_weibull3: need at least 3 samples");
  const double lo = *std::min_element(data.begin(), data.end());
  const double hi = *std::max_element(data.begin(), data.end());
  const double range = hi - lo;
  if (!(range > 0.0)) throw DegenerateInput("fit_weibull3: constant data");

  std::vector<double> log_y(data.size());
  auto profile = [&](double log_offset) {
    const double location = lo - range * std::exp(log_offset);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double y = data[i] - location;
      if (!(y > 0.0)) return WeibullInner{0.0, 0.0, -kInf};
      log_y[i] = std::log(y);
    }
    return weibull2_mle(log_y);
  };

  const double u_min = std::log(1e-4), u_max = std::log(1e3);
  const int grid = 120;
  double best_u = u_min, best_ll = -kInf;
  int best_i = 0;
  for (int i = 0; i <= grid; ++i) {
    const double u = u_min + (u_max - u_min) * i / grid;
    const double ll = profile(u).loglik;
    if (ll > best_ll) {
      best_ll = ll;
      best_u = u;
      best_i = i;
    }
  }
  if (!std::isfinite(best_ll)) throw EstimationError("fit_weibull3: no feasible location offset");
  const double du = (u_max - u_min) / grid;
  double a = best_u - (best_i > 0 ? du : 0.0);
  double b = best_u + (best_i < grid ? du : 0.0);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = profile(c).loglik, fd = profile(d).loglik;
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = profile(c).loglik;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = profile(d).loglik;
    }
  }
  double u = 0.5 * (a + b);
  auto inner = profile(u);
  if (inner.loglik < best_ll) {
    u = best_u;
    inner = profile(u);
  }
  return {inner.shape, inner.scale, lo - range * std::exp(u)};
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double acc = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double m = 2.0 * k - 1.0;
      acc += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * acc, 0.0, 1.0);
  }
  double acc = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    acc += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * acc, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> data, const std::function<double(double)>& cdf) {
  if (data.size() < 5) throw InvalidArgument("ks_test: need at least 5 samples");
  std::vector<double> x(data.begin(), data.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

FitReport fit_gev_report(std::span<const double> data) {
  const auto fit = fit_gev(data);
  const auto p = fit.params;
  const auto ks = ks_test(data, [&](double r) { return gev_cdf(r, p); });
  FitReport rep;
  rep.family = DistributionFamily::Gev;
  rep.params = {p.xi, p.sigma, p.mu};
  rep.log_likelihood = fit.loglik;
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  rep.n = data.size();
  return rep;
}

FitReport fit_gaussian(std::span<const double> data) {
  const auto p = fit_gaussian_params(data);
  const auto ks = ks_test(data, [&](double r) { return normal_cdf(r, p); });
  FitReport rep;
  rep.family = DistributionFamily::Gaussian;
  rep.params = {p.mean, p.sd};
  double ll = 0.0;
  for (double r : data) ll += std::log(normal_pdf(r, p));
  rep.log_likelihood = ll;
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  rep.n = data.size();
  return rep;
}

FitReport fit_weibull3(std::span<const double> data) {
  const auto p = fit_weibull3_params(data);
  const auto ks = ks_test(data, [&](double r) { return weibull3_cdf(r, p); });
  FitReport rep;
  rep.family = DistributionFamily::Weibull3;
  rep.params = {p.shape, p.scale, p.location};
  rep.log_likelihood = weibull3_loglik(data, p);
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  rep.n = data.size();
  return rep;
}

FitReport fit_report(std::span<const double> data, DistributionFamily family) {
  switch (family) {
    case DistributionFamily::Gev: return fit_gev_report(data);
    case DistributionFamily::Gaussian: return fit_gaussian(data);
    case DistributionFamily::Weibull3: return fit_weibull3(data);
  }
  throw InvalidArgument("fit_report: unknown family");
}

double bootstrap_ks_p_value(std::span<const double> data, DistributionFamily family, int replicates,
                            std::uint64_t seed) {
  if (replicates < 1) throw InvalidArgument("bootstrap_ks_p_value: replicates must be positive");
  const auto base = fit_report(data, family);
  std::mt19937_64 rng(seed);
  int exceed = 0, used = 0;
  for (int b = 0; b < replicates; ++b) {
    std::vector<double> sample;
    const auto& q = base.params;
    switch (family) {
      case DistributionFamily::Gev: sample = gev_sample(data.size(), {q[2], q[1], q[0]}, rng); break;
      case DistributionFamily::Gaussian: {
        std::normal_distribution<double> g(q[0], q[1]);
        sample.resize(data.size());
        for (auto& v : sample) v = g(rng);
        break;
      }
      case DistributionFamily::Weibull3: sample = weibull3_sample(data.size(), {q[0], q[1], q[2]}, rng); break;
    }
    try {
      const auto rep = fit_report(sample, family);
      ++used;
      if (rep.ks_statistic >= base.ks_statistic) ++exceed;
    } catch (const Error&) {
    }
  }
  if (used == 0) throw EstimationError("bootstrap_ks_p_value: every replicate failed to fit");
  return (1.0 + exceed) / (1.0 + used);
}

std::vector<double> autocorrelation(std::span<const double> residuals, std::size_t max_lag) {
  if (residuals.size() <= max_lag) throw InvalidArgument("autocorrelation: need more samples than max_lag");
  const double m = stats::mean(residuals);
  double c0 = 0.0;
  for (double r : residuals) c0 += (r - m) * (r - m);
  if (!(c0 > 0.0)) throw DegenerateInput("autocorrelation: zero-variance input");
  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < residuals.size(); ++t) acc += (residuals[t] - m) * (residuals[t + k] - m);
    out[k] = acc / c0;
  }
  return out;
}

void write_fit_table(const std::filesystem::path& path, std::span<const FitReport> reports) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write fit table " + path.string());
  out << "location_id,family,param1,param2,param3,log_likelihood,ks_statistic,ks_p_value,bootstrap_p_value,n\n";
  for (const auto& r : reports) {
    out << r.location_id << ',' << family_name(r.family);
    for (std::size_t i = 0; i < 3; ++i) {
      out << ',';
      if (i < r.params.size()) out << text::format_double(r.params[i]);
    }
    out << ',' << text::format_double(r.log_likelihood) << ',' << text::format_double(r.ks_statistic) << ','
        << text::format_double(r.ks_p_value) << ',';
    if (r.bootstrap_p_value) out << text::format_double(*r.bootstrap_p_value);
    out << ',' << r.n << '\n';
  }
}

}  // namespace evd
}  // namespace railpad

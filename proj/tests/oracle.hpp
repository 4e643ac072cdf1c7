#pragma once

// Reference formulas written independently of the library, for cross-checks.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

struct Gev {
  double mu, sigma, xi;
};

inline double gev_upper_or_lower_endpoint(const Gev& p) { return p.mu - p.sigma / p.xi; }

inline double gev_density(double r, const Gev& p) {
  const double t = 1.0 + p.xi * (r - p.mu) / p.sigma;
  if (t <= 0.0) return 0.0;
  return std::pow(t, -1.0 / p.xi - 1.0) * std::exp(-std::pow(t, -1.0 / p.xi)) / p.sigma;
}

/// -N ln σ - (1 + 1/ξ) Σ ln t_i - Σ t_i^(-1/ξ).
inline double gev_loglik(const std::vector<double>& x, const Gev& p) {
  double a = 0.0, b = 0.0;
  for (double r : x) {
    const double t = 1.0 + p.xi * (r - p.mu) / p.sigma;
    if (t <= 0.0) return -INFINITY;
    a += std::log(t);
    b += std::pow(t, -1.0 / p.xi);
  }
  return -static_cast<double>(x.size()) * std::log(p.sigma) - (1.0 + 1.0 / p.xi) * a - b;
}

/// Inverse-CDF draw: μ + σ((-ln U)^(-ξ) - 1)/ξ.
inline std::vector<double> gev_draw(std::size_t n, const Gev& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) {
    double w = u(rng);
    while (w <= 0.0) w = u(rng);
    v = p.mu + p.sigma * (std::pow(-std::log(w), -p.xi) - 1.0) / p.xi;
  }
  return x;
}

/// location + scale (-ln(1-U))^(1/shape).
inline std::vector<double> weibull3_draw(std::size_t n, double shape, double scale, double location,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = location + scale * std::pow(-std::log1p(-u(rng)), 1.0 / shape);
  return x;
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

/// Adaptive Simpson over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50);
}

/// Integral of a GEV density over its support, split into pieces so the
/// adaptive rule sees the mode.
inline double gev_mass(const std::function<double(double)>& pdf, const Gev& p) {
  std::vector<double> cuts;
  if (p.xi < 0.0) {
    const double hi = gev_upper_or_lower_endpoint(p);
    for (double k = -200.0; p.mu + k * p.sigma < hi; k += 0.5) cuts.push_back(p.mu + k * p.sigma);
    cuts.push_back(hi);
  } else {
    const double lo = gev_upper_or_lower_endpoint(p);
    cuts.push_back(lo);
    for (double k = -1.0 / p.xi + 0.25; k < 40.0; k += 0.25) cuts.push_back(p.mu + k * p.sigma);
    for (double k = 40.0; k < 1e9; k *= 1.5) cuts.push_back(p.mu + k * p.sigma);
  }
  double total = 0.0;
  for (std::size_t i = 1; i < cuts.size(); ++i) total += integrate(pdf, cuts[i - 1], cuts[i], 1e-14);
  return total;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace oracle

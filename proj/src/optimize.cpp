#include "railpad/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "railpad/error.hpp"

namespace railpad::optimize {

namespace {

struct Run {
  std::vector<double> x;
  double f;
  bool converged;
};

Run run_simplex(const Objective& raw, std::vector<double> x0, const std::vector<double>& step,
                const NelderMeadOptions& opt, int& evals) {
  const std::size_t n = x0.size();
  auto f = [&](const std::vector<double>& x) {
    ++evals;
    const double v = raw(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  while (evals < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[n - 1];

    double diameter = 0.0, scale = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t d = 0; d < n; ++d) diameter = std::max(diameter, std::abs(pts[i][d] - pts[best][d]));
    }
    for (std::size_t d = 0; d < n; ++d) scale = std::max(scale, std::abs(pts[best][d]));
    if (std::isfinite(vals[worst]) &&
        vals[worst] - vals[best] <= opt.f_tolerance * (1.0 + std::abs(vals[best])) &&
        diameter <= opt.x_tolerance * (1.0 + scale)) {
      return {pts[best], vals[best], true};
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d] / static_cast<double>(n);
    }
    for (std::size_t d = 0; d < n; ++d) trial[d] = centroid[d] + (centroid[d] - pts[worst][d]);
    const double fr = f(trial);
    if (fr < vals[best]) {
      for (std::size_t d = 0; d < n; ++d) trial2[d] = centroid[d] + 2.0 * (centroid[d] - pts[worst][d]);
      const double fe = f(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    for (std::size_t d = 0; d < n; ++d) {
      trial2[d] = outside ? centroid[d] + 0.5 * (trial[d] - centroid[d])
                          : centroid[d] + 0.5 * (pts[worst][d] - centroid[d]);
    }
    const double fc = f(trial2);
    if (fc < std::min(fr, vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
      vals[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], false};
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step,
                             const NelderMeadOptions& options) {
  if (x0.empty() || x0.size() != step.size()) throw InvalidArgument("nelder_mead: bad dimensions");
  int evals = 0;
  Run run = run_simplex(f, x0, step, options, evals);
  for (int r = 0; r < options.restarts && run.converged && evals < options.max_evaluations; ++r) {
    std::vector<double> small(step.size());
    for (std::size_t d = 0; d < step.size(); ++d) small[d] = 0.1 * step[d];
    Run again = run_simplex(f, run.x, small, options, evals);
    const bool improved = again.f < run.f - options.f_tolerance * (1.0 + std::abs(run.f));
    if (again.f <= run.f) run = again;
    if (!improved) break;
  }
  return {run.x, run.f, evals, run.converged && std::isfinite(run.f)};
}

}  // namespace railpad::optimize

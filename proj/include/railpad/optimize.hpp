#pragma once

#include <functional>
#include <span>
#include <vector>

namespace railpad::optimize {

struct NelderMeadOptions {
  int max_evaluations = 20000;
  /// Converged when f_worst - f_best <= f_tolerance·(1 + |f_best|) and the
  /// simplex diameter <= x_tolerance·(1 + |x_best|).
  double f_tolerance = 1e-12;
  double x_tolerance = 1e-9;
  /// Re-expansions of the simplex around the optimum after convergence.
  int restarts = 2;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Minimizes `f`. Non-finite values are treated as +infinity, so
/// constraints can be expressed by returning infinity outside the domain.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step,
                             const NelderMeadOptions& options = {});

}  // namespace railpad::optimize

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace trajproj {

struct LbfgsConfig {
  std::size_t memory = 10;
  std::size_t max_iters = 200;
  double gradient_tolerance = 1e-8;  ///< on the infinity norm of the gradient
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  std::size_t max_line_search_evals = 25;
  bool record_path = false;

  void validate() const;
};

enum class Termination { gradient_tolerance, max_iterations, line_search_failure };

std::string to_string(Termination t);

/// One accepted line-search step: phi(alpha) = f(x + alpha d).
struct LineSearchStep {
  double alpha = 0.0;
  double f0 = 0.0;
  double f1 = 0.0;
  double slope0 = 0.0;  ///< phi'(0)
  double slope1 = 0.0;  ///< phi'(alpha)
  std::size_t evaluations = 0;
};

struct OptimTrace {
  std::vector<std::vector<double>> iterates;  ///< u_0..u_K when record_path is set
  std::vector<double> objective_values;
  std::vector<double> gradient_norms;  ///< infinity norms
  std::vector<LineSearchStep> steps;
  Termination reason = Termination::max_iterations;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct MinimizeResult {
  std::vector<double> x;
  OptimTrace trace;
};

MinimizeResult minimize(const Objective& objective, std::vector<double> x0, const LbfgsConfig& cfg);

}  // namespace trajproj

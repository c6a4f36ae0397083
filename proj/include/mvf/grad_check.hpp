#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mvf/autodiff.hpp"

namespace mvf {

/// A deterministic scalar function of the bound parameters. It is re-executed
/// once per perturbed coordinate, always in double precision.
using ScalarProgram = std::function<Var<double>(Binder<double>&)>;

using GradientBuffers = std::vector<std::vector<double>>;

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Lower bound on the relative-error denominator. Central differences at
  /// step 1e-6 carry ~1e-10 of rounding noise, so coordinates whose true
  /// gradient is below this floor are judged by absolute error instead.
  double denominator_floor = 1e-4;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t flagged = 0;

  bool passed() const { return flagged == 0; }
};

GradientBuffers promote(const ParameterSet& params);

GradientBuffers analytic_gradient(const ParameterSet& params, const ScalarProgram& program,
                                  const GradientBuffers& values);
/// Central differences, (f(x+h) - f(x-h)) / 2h, one coordinate at a time.
GradientBuffers numeric_gradient(const ParameterSet& params, const ScalarProgram& program,
                                 const GradientBuffers& values, double step);

GradCheckReport compare_gradients(const ParameterSet& params, const GradientBuffers& analytic,
                                  const GradientBuffers& numeric,
                                  const GradCheckOptions& options);

GradCheckReport grad_check(const ParameterSet& params, const ScalarProgram& program,
                           const GradCheckOptions& options = {});

}  // namespace mvf

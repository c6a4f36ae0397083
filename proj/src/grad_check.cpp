#include "mvf/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mvf {

namespace {

double evaluate(const ParameterSet& params, const ScalarProgram& program,
                const GradientBuffers& values) {
  Tape<double> tape;
  Binder<double> binder(tape, params, values);
  auto out = program(binder);
  if (out.value().size() != 1) {
    throw ContractError("grad_check program must return a scalar, got " +
                        shape_str(out.shape()));
  }
  return out.value()[0];
}

}  // namespace

GradientBuffers promote(const ParameterSet& params) {
  GradientBuffers out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.value.data.begin(), p.value.data.end());
  return out;
}

GradientBuffers analytic_gradient(const ParameterSet& params, const ScalarProgram& program,
                                  const GradientBuffers& values) {
  Tape<double> tape;
  Binder<double> binder(tape, params, values);
  auto loss = program(binder);
  tape.backward(loss);
  GradientBuffers out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(binder.grad(i));
  return out;
}

GradientBuffers numeric_gradient(const ParameterSet& params, const ScalarProgram& program,
                                 const GradientBuffers& values, double step) {
  GradientBuffers work = values;
  GradientBuffers out;
  out.reserve(params.size());
  for (std::size_t p = 0; p < work.size(); ++p) {
    std::vector<double> g(work[p].size());
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double saved = work[p][i];
      work[p][i] = saved + step;
      const double plus = evaluate(params, program, work);
      work[p][i] = saved - step;
      const double minus = evaluate(params, program, work);
      work[p][i] = saved;
      g[i] = (plus - minus) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

GradCheckReport compare_gradients(const ParameterSet& params, const GradientBuffers& analytic,
                                  const GradientBuffers& numeric,
                                  const GradCheckOptions& options) {
  GradCheckReport report;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      const double a = analytic[p][i];
      const double n = numeric[p][i];
      const double denom = std::max({std::abs(a), std::abs(n), options.denominator_floor});
      const double err = std::abs(a - n) / denom;
      ++report.checked;
      if (!(err <= options.tolerance)) ++report.flagged;
      if (err > report.max_relative_error || std::isnan(err)) {
        report.max_relative_error = err;
        report.worst_parameter = params[p].name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const ParameterSet& params, const ScalarProgram& program,
                           const GradCheckOptions& options) {
  const auto values = promote(params);
  const auto analytic = analytic_gradient(params, program, values);
  const auto numeric = numeric_gradient(params, program, values, options.step);
  return compare_gradients(params, analytic, numeric, options);
}

}  // namespace mvf

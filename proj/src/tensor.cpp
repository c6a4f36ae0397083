#include "mvf/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace mvf {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape s, std::vector<Real> values, bool track)
    : shape(std::move(s)), data(std::move(values)), requires_grad(track) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_str(shape));
  }
  if (numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::zeros(Shape s, bool track) {
  const auto n = numel(s);
  return BasicTensor(std::move(s), std::vector<Real>(n, Real(0)), track);
}

template struct BasicTensor<float>;
template struct BasicTensor<double>;

std::size_t ParameterSet::add(std::string name, TensorF32 value) {
  if (find(name) != params_.size()) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  value.requires_grad = true;
  value.grad.assign(value.data.size(), 0.0f);
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::find(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter& p) { return p.name == name; });
  return static_cast<std::size_t>(it - params_.begin());
}

std::size_t ParameterSet::scalar_count() const { return scalar_count(""); }

std::size_t ParameterSet::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.rfind(prefix, 0) == 0) n += p.value.size();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) std::fill(p.value.grad.begin(), p.value.grad.end(), 0.0f);
}

}  // namespace mvf

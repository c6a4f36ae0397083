#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvf {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised on any shape disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an operation's precondition (non-scalar
/// loss, zero-norm embedding, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename Real>
struct BasicTensor {
  Shape shape;
  std::vector<Real> data;
  bool requires_grad = false;
  std::vector<Real> grad;

  BasicTensor() = default;
  BasicTensor(Shape s, std::vector<Real> values, bool track = false);

  static BasicTensor zeros(Shape s, bool track = false);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool has_grad() const { return !grad.empty(); }
};

using TensorF32 = BasicTensor<float>;
using TensorF64 = BasicTensor<double>;

extern template struct BasicTensor<float>;
extern template struct BasicTensor<double>;

struct Parameter {
  std::string name;
  TensorF32 value;
};

/// Ordered, name-unique collection of trainable tensors. Modules refer to
/// their parameters by index so that a ParameterSet can be copied freely.
class ParameterSet {
 public:
  std::size_t add(std::string name, TensorF32 value);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  /// Index of the named parameter, or size() when absent.
  std::size_t find(const std::string& name) const;

  /// Total number of scalar weights.
  std::size_t scalar_count() const;
  /// Scalar count restricted to parameters whose name starts with `prefix`.
  std::size_t scalar_count(const std::string& prefix) const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

}  // namespace mvf

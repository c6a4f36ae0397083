#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors.
//
// A Tape records every operation executed through it. Values live on the
// tape and are addressed by Var handles; backward() replays the record in
// reverse, visiting each node once. The engine is instantiated for float
// (training) and double (gradient checking).

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mvf/tensor.hpp"

namespace mvf {

template <typename Real>
class Tape;

template <typename Real>
struct Var {
  Tape<Real>* tape = nullptr;
  std::size_t id = 0;

  const Shape& shape() const;
  std::span<const Real> value() const;
  std::span<const Real> grad() const;
  std::size_t rows() const { return shape()[0]; }
  std::size_t cols() const { return shape().back(); }
};

template <typename Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  /// Untracked input; never receives a gradient.
  Var<Real> constant(Shape shape, std::vector<Real> value);
  /// Tracked leaf (a parameter or an input under differentiation).
  Var<Real> leaf(Shape shape, std::vector<Real> value);
  Var<Real> leaf(const BasicTensor<Real>& t) { return leaf(t.shape, t.data); }

  /// Records a derived node. `backward` is invoked only if some input is
  /// tracked; it reads the node's grad and accumulates into its inputs.
  Var<Real> record(Shape shape, std::vector<Real> value,
                   std::initializer_list<Var<Real>> inputs, BackwardFn backward);
  Var<Real> record(Shape shape, std::vector<Real> value,
                   const std::vector<Var<Real>>& inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every tracked node.
  /// Throws ContractError if `loss` is not a scalar.
  void backward(Var<Real> loss);

  const Node& node(std::size_t id) const { return nodes_[id]; }
  Node& node(std::size_t id) { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  /// Number of nodes visited by the last backward() call.
  std::size_t visited() const { return visited_; }

  /// Gradient buffer of `id`, allocated on first use.
  std::vector<Real>& grad_buffer(std::size_t id);

 private:
  std::vector<Node> nodes_;
  std::size_t visited_ = 0;
};

// ---- differentiable operations ----------------------------------------

template <typename Real> Var<Real> matmul(Var<Real> a, Var<Real> b);
template <typename Real> Var<Real> transpose(Var<Real> a);
template <typename Real> Var<Real> add(Var<Real> a, Var<Real> b);
/// x + b where b has the length of x's last dimension.
template <typename Real> Var<Real> add_bias(Var<Real> x, Var<Real> b);
template <typename Real> Var<Real> mul(Var<Real> a, Var<Real> b);
template <typename Real> Var<Real> scale(Var<Real> x, Real factor);
template <typename Real> Var<Real> sum(Var<Real> x);
template <typename Real> Var<Real> softmax(Var<Real> x, std::size_t axis);
template <typename Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, Real eps);
/// Exact Gaussian-CDF GELU.
template <typename Real> Var<Real> gelu(Var<Real> x);
template <typename Real>
Var<Real> concat(const std::vector<Var<Real>>& parts, std::size_t axis);
/// Contiguous sub-range [start, start+length) along `axis`.
template <typename Real>
Var<Real> narrow(Var<Real> x, std::size_t axis, std::size_t start, std::size_t length);
template <typename Real> Var<Real> reshape(Var<Real> x, Shape shape);
/// Rows of a 2-D tensor gathered by index.
template <typename Real>
Var<Real> take_rows(Var<Real> x, const std::vector<std::size_t>& rows);
/// Mean over consecutive groups of `group` rows: [(n*g) x d] -> [n x d].
template <typename Real> Var<Real> mean_row_groups(Var<Real> x, std::size_t group);

template <typename Real>
struct AttentionResult {
  Var<Real> output;   // [nq x dv]
  Var<Real> weights;  // [nq x nk], rows sum to one
};

/// softmax(q k^T / sqrt(dk)) v
template <typename Real>
AttentionResult<Real> scaled_dot_attention(Var<Real> q, Var<Real> k, Var<Real> v);

// ---- parameter binding -------------------------------------------------

/// Lifts a ParameterSet onto a tape in precision `Real`. Each parameter is
/// placed on the tape at most once; after backward() the gradients can be
/// read back or accumulated into the float parameters.
template <typename Real>
class Binder {
 public:
  Binder(Tape<Real>& tape, const ParameterSet& params);
  /// Uses explicit values (one buffer per parameter) instead of the
  /// ParameterSet's own; the gradient checker perturbs these.
  Binder(Tape<Real>& tape, const ParameterSet& params,
         const std::vector<std::vector<Real>>& values);

  Var<Real> operator()(std::size_t index);
  Tape<Real>& tape() { return *tape_; }
  const ParameterSet& params() const { return *params_; }

  /// Gradient for parameter `index`; zeros if it was never bound.
  std::vector<Real> grad(std::size_t index) const;
  /// Adds the tape gradients into `target`'s float grad buffers.
  void accumulate_into(ParameterSet& target) const;

 private:
  Tape<Real>* tape_;
  const ParameterSet* params_;
  const std::vector<std::vector<Real>>* values_ = nullptr;
  std::vector<std::ptrdiff_t> bound_;
};

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Binder<float>;
extern template class Binder<double>;

}  // namespace mvf

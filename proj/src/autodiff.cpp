#include "mvf/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mvf {

namespace {

void require_rank2(const Shape& s, const char* op) {
  if (s.size() != 2) {
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " + shape_str(s));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit out;
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  out.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

template <typename Real>
bool tracked(Tape<Real>& t, std::size_t id) {
  return t.node(id).requires_grad;
}

}  // namespace

// ---- Var / Tape --------------------------------------------------------

template <typename Real>
const Shape& Var<Real>::shape() const {
  return tape->node(id).shape;
}

template <typename Real>
std::span<const Real> Var<Real>::value() const {
  return tape->node(id).value;
}

template <typename Real>
std::span<const Real> Var<Real>::grad() const {
  return tape->node(id).grad;
}

template struct Var<float>;
template struct Var<double>;

template <typename Real>
Var<Real> Tape<Real>::constant(Shape shape, std::vector<Real> value) {
  if (numel(shape) != value.size()) {
    throw DimensionError("constant of shape " + shape_str(shape) + " given " +
                         std::to_string(value.size()) + " values");
  }
  nodes_.push_back({std::move(shape), std::move(value), {}, false, nullptr});
  return {this, nodes_.size() - 1};
}

template <typename Real>
Var<Real> Tape<Real>::leaf(Shape shape, std::vector<Real> value) {
  auto v = constant(std::move(shape), std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

template <typename Real>
Var<Real> Tape<Real>::record(Shape shape, std::vector<Real> value,
                             std::initializer_list<Var<Real>> inputs, BackwardFn backward) {
  return record(std::move(shape), std::move(value), std::vector<Var<Real>>(inputs),
                std::move(backward));
}

template <typename Real>
Var<Real> Tape<Real>::record(Shape shape, std::vector<Real> value,
                             const std::vector<Var<Real>>& inputs, BackwardFn backward) {
  bool any = false;
  for (const auto& in : inputs) {
    if (in.tape != this) throw ContractError("operands recorded on different tapes");
    any = any || nodes_[in.id].requires_grad;
  }
  nodes_.push_back({std::move(shape), std::move(value), {}, any,
                    any ? std::move(backward) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

template <typename Real>
std::vector<Real>& Tape<Real>::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
  return n.grad;
}

template <typename Real>
void Tape<Real>::backward(Var<Real> loss) {
  if (loss.tape != this) throw ContractError("loss belongs to a different tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(nodes_[loss.id].shape));
  }
  for (auto& n : nodes_) n.grad.clear();
  visited_ = 0;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = Real(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
    ++visited_;
  }
}

template class Tape<float>;
template class Tape<double>;

// ---- operations --------------------------------------------------------

template <typename Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul shape mismatch: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;
  std::vector<Real> c(m * n, Real(0));
  MMap(c.data(), Eigen::Index(m), Eigen::Index(n)).noalias() =
      CMap(a.value().data(), Eigen::Index(m), Eigen::Index(k)) *
      CMap(b.value().data(), Eigen::Index(k), Eigen::Index(n));
  const auto ia = a.id, ib = b.id;
  return a.tape->record({m, n}, std::move(c), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    const CMap g(t.node(self).grad.data(), Eigen::Index(m), Eigen::Index(n));
    const CMap va(t.node(ia).value.data(), Eigen::Index(m), Eigen::Index(k));
    const CMap vb(t.node(ib).value.data(), Eigen::Index(k), Eigen::Index(n));
    if (tracked(t, ia)) {
      MMap(t.grad_buffer(ia).data(), Eigen::Index(m), Eigen::Index(k)).noalias() +=
          g * vb.transpose();
    }
    if (tracked(t, ib)) {
      MMap(t.grad_buffer(ib).data(), Eigen::Index(k), Eigen::Index(n)).noalias() +=
          va.transpose() * g;
    }
  });
}

template <typename Real>
Var<Real> transpose(Var<Real> a) {
  require_rank2(a.shape(), "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<Real> out(m * n);
  auto va = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = va[i * n + j];
  const auto ia = a.id;
  return a.tape->record({n, m}, std::move(out), {a}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " + " +
                         shape_str(b.shape()));
  }
  auto va = a.value();
  auto vb = b.value();
  std::vector<Real> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(a.shape(), std::move(out), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    for (auto id : {ia, ib}) {
      if (!tracked(t, id)) continue;
      auto& gi = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename Real>
Var<Real> add_bias(Var<Real> x, Var<Real> b) {
  const std::size_t d = b.value().size();
  if (x.shape().back() != d || b.shape().size() != 1) {
    throw DimensionError("add_bias mismatch: " + shape_str(x.shape()) + " + " +
                         shape_str(b.shape()));
  }
  auto vx = x.value();
  auto vb = b.value();
  std::vector<Real> out(vx.begin(), vx.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i % d];
  const auto ix = x.id, ib = b.id;
  return x.tape->record(x.shape(), std::move(out), {x, b}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    if (tracked(t, ix)) {
      auto& gx = t.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tracked(t, ib)) {
      auto& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
    }
  });
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul shape mismatch: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  auto va = a.value();
  auto vb = b.value();
  std::vector<Real> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(a.shape(), std::move(out), {a, b}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    if (tracked(t, ia)) {
      auto& ga = t.grad_buffer(ia);
      const auto& v = t.node(ib).value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * v[i];
    }
    if (tracked(t, ib)) {
      auto& gb = t.grad_buffer(ib);
      const auto& v = t.node(ia).value;
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * v[i];
    }
  });
}

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor) {
  auto vx = x.value();
  std::vector<Real> out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] * factor;
  const auto ix = x.id;
  return x.tape->record(x.shape(), std::move(out), {x}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

template <typename Real>
Var<Real> sum(Var<Real> x) {
  Real total = 0;
  for (auto v : x.value()) total += v;
  const auto ix = x.id;
  return x.tape->record({1}, {total}, {x}, [=](Tape<Real>& t, std::size_t self) {
    const Real g = t.node(self).grad[0];
    auto& gx = t.grad_buffer(ix);
    for (auto& v : gx) v += g;
  });
}

template <typename Real>
Var<Real> softmax(Var<Real> x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
  }
  const auto sp = split_at(s, axis);
  auto vx = x.value();
  std::vector<Real> y(vx.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.extent * sp.inner + in;
      Real mx = vx[base];
      for (std::size_t j = 1; j < sp.extent; ++j) mx = std::max(mx, vx[base + j * sp.inner]);
      Real z = 0;
      for (std::size_t j = 0; j < sp.extent; ++j) {
        const Real e = std::exp(vx[base + j * sp.inner] - mx);
        y[base + j * sp.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < sp.extent; ++j) y[base + j * sp.inner] /= z;
    }
  }
  const auto ix = x.id;
  return x.tape->record(s, std::move(y), {x}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const auto& yv = t.node(self).value;
    auto& gx = t.grad_buffer(ix);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.extent * sp.inner + in;
        Real dot = 0;
        for (std::size_t j = 0; j < sp.extent; ++j) {
          const auto idx = base + j * sp.inner;
          dot += g[idx] * yv[idx];
        }
        for (std::size_t j = 0; j < sp.extent; ++j) {
          const auto idx = base + j * sp.inner;
          gx[idx] += yv[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

template <typename Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, Real eps) {
  const std::size_t d = x.shape().back();
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("layer_norm parameters " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match input " +
                         shape_str(x.shape()));
  }
  auto vx = x.value();
  auto vg = gamma.value();
  auto vb = beta.value();
  const std::size_t rows = vx.size() / d;
  std::vector<Real> y(vx.size());
  std::vector<Real> xhat(vx.size());
  std::vector<Real> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = vx.data() + r * d;
    Real mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= Real(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= Real(d);
    const Real inv = Real(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const Real h = (xr[j] - mean) * inv;
      xhat[r * d + j] = h;
      y[r * d + j] = vg[j] * h + vb[j];
    }
  }
  const auto ix = x.id, ig = gamma.id, ib = beta.id;
  return x.tape->record(
      x.shape(), std::move(y), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<Real>& t,
                                                                 std::size_t self) {
        const auto& g = t.node(self).grad;
        const auto& gv = t.node(ig).value;
        if (tracked(t, ig)) {
          auto& gg = t.grad_buffer(ig);
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (tracked(t, ib)) {
          auto& gb = t.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
        }
        if (tracked(t, ix)) {
          auto& gx = t.grad_buffer(ix);
          for (std::size_t r = 0; r < rows; ++r) {
            Real s1 = 0, s2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Real dh = g[r * d + j] * gv[j];
              s1 += dh;
              s2 += dh * xhat[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const Real dh = g[r * d + j] * gv[j];
              gx[r * d + j] +=
                  inv_std[r] * (dh - s1 / Real(d) - xhat[r * d + j] * s2 / Real(d));
            }
          }
        }
      });
}

template <typename Real>
Var<Real> gelu(Var<Real> x) {
  constexpr Real inv_sqrt2 = Real(1) / std::numbers::sqrt2_v<Real>;
  auto vx = x.value();
  std::vector<Real> y(vx.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = Real(0.5) * vx[i] * (Real(1) + std::erf(vx[i] * inv_sqrt2));
  }
  const auto ix = x.id;
  return x.tape->record(x.shape(), std::move(y), {x}, [=](Tape<Real>& t, std::size_t self) {
    constexpr Real inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<Real> * inv_sqrt2;
    const auto& g = t.node(self).grad;
    const auto& v = t.node(ix).value;
    auto& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real cdf = Real(0.5) * (Real(1) + std::erf(v[i] * inv_sqrt2));
      const Real pdf = inv_sqrt_2pi * std::exp(Real(-0.5) * v[i] * v[i]);
      gx[i] += g[i] * (cdf + v[i] * pdf);
    }
  });
}

template <typename Real>
Var<Real> concat(const std::vector<Var<Real>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
    }
    out_shape[axis] += s[axis];
  }
  const auto sp = split_at(out_shape, axis);
  const std::size_t out_chunk = sp.extent * sp.inner;
  std::vector<Real> out(numel(out_shape));
  std::vector<std::size_t> ids, offsets, chunks;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[axis] * sp.inner;
    auto v = p.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(v.begin() + o * chunk, chunk, out.begin() + o * out_chunk + offset);
    }
    ids.push_back(p.id);
    offsets.push_back(offset);
    chunks.push_back(chunk);
    offset += chunk;
  }
  return parts.front().tape->record(
      out_shape, std::move(out), parts, [=](Tape<Real>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!tracked(t, ids[k])) continue;
          auto& gp = t.grad_buffer(ids[k]);
          for (std::size_t o = 0; o < sp.outer; ++o) {
            const Real* src = g.data() + o * out_chunk + offsets[k];
            Real* dst = gp.data() + o * chunks[k];
            for (std::size_t i = 0; i < chunks[k]; ++i) dst[i] += src[i];
          }
        }
      });
}

template <typename Real>
Var<Real> narrow(Var<Real> x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw DimensionError("narrow [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") on axis " + std::to_string(axis) +
                         " out of range for " + shape_str(s));
  }
  const auto sp = split_at(s, axis);
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t in_chunk = sp.extent * sp.inner;
  const std::size_t out_chunk = length * sp.inner;
  const std::size_t offset = start * sp.inner;
  auto v = x.value();
  std::vector<Real> out(sp.outer * out_chunk);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(v.begin() + o * in_chunk + offset, out_chunk, out.begin() + o * out_chunk);
  }
  const auto ix = x.id;
  return x.tape->record(out_shape, std::move(out), {x}, [=](Tape<Real>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(ix);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < out_chunk; ++i) {
        gx[o * in_chunk + offset + i] += g[o * out_chunk + i];
      }
    }
  });
}

template <typename Real>
Var<Real> reshape(Var<Real> x, Shape shape) {
  if (numel(shape) != x.value().size()) {
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  auto v = x.value();
  const auto ix = x.id;
  return x.tape->record(std::move(shape), std::vector<Real>(v.begin(), v.end()), {x},
                        [=](Tape<Real>& t, std::size_t self) {
                          const auto& g = t.node(self).grad;
                          auto& gx = t.grad_buffer(ix);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        });
}

template <typename Real>
Var<Real> take_rows(Var<Real> x, const std::vector<std::size_t>& rows) {
  require_rank2(x.shape(), "take_rows");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  auto v = x.value();
  std::vector<Real> out(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw DimensionError("take_rows index " + std::to_string(rows[r]) + " out of range for " +
                           shape_str(x.shape()));
    }
    std::copy_n(v.begin() + rows[r] * d, d, out.begin() + r * d);
  }
  const auto ix = x.id;
  return x.tape->record({rows.size(), d}, std::move(out), {x},
                        [=](Tape<Real>& t, std::size_t self) {
                          const auto& g = t.node(self).grad;
                          auto& gx = t.grad_buffer(ix);
                          for (std::size_t r = 0; r < rows.size(); ++r)
                            for (std::size_t j = 0; j < d; ++j) gx[rows[r] * d + j] += g[r * d + j];
                        });
}

template <typename Real>
Var<Real> mean_row_groups(Var<Real> x, std::size_t group) {
  require_rank2(x.shape(), "mean_row_groups");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  if (group == 0 || n % group != 0) {
    throw DimensionError("mean_row_groups: " + std::to_string(n) +
                         " rows not divisible into groups of " + std::to_string(group));
  }
  const std::size_t out_rows = n / group;
  auto v = x.value();
  std::vector<Real> out(out_rows * d, Real(0));
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t e = 0; e < group; ++e)
      for (std::size_t j = 0; j < d; ++j) out[r * d + j] += v[(r * group + e) * d + j];
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= Real(group);
  }
  const auto ix = x.id;
  return x.tape->record({out_rows, d}, std::move(out), {x},
                        [=](Tape<Real>& t, std::size_t self) {
                          const auto& g = t.node(self).grad;
                          auto& gx = t.grad_buffer(ix);
                          for (std::size_t r = 0; r < out_rows; ++r)
                            for (std::size_t e = 0; e < group; ++e)
                              for (std::size_t j = 0; j < d; ++j)
                                gx[(r * group + e) * d + j] += g[r * d + j] / Real(group);
                        });
}

template <typename Real>
AttentionResult<Real> scaled_dot_attention(Var<Real> q, Var<Real> k, Var<Real> v) {
  require_rank2(q.shape(), "attention query");
  require_rank2(k.shape(), "attention key");
  require_rank2(v.shape(), "attention value");
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw DimensionError("attention shape mismatch: q " + shape_str(q.shape()) + ", k " +
                         shape_str(k.shape()) + ", v " + shape_str(v.shape()));
  }
  const Real factor = Real(1) / std::sqrt(Real(k.cols()));
  auto logits = scale(matmul(q, transpose(k)), factor);
  auto weights = softmax(logits, 1);
  return {matmul(weights, v), weights};
}

// ---- Binder ------------------------------------------------------------

template <typename Real>
Binder<Real>::Binder(Tape<Real>& tape, const ParameterSet& params)
    : tape_(&tape), params_(&params), bound_(params.size(), -1) {}

template <typename Real>
Binder<Real>::Binder(Tape<Real>& tape, const ParameterSet& params,
                     const std::vector<std::vector<Real>>& values)
    : tape_(&tape), params_(&params), values_(&values), bound_(params.size(), -1) {
  if (values.size() != params.size()) {
    throw DimensionError("binder given " + std::to_string(values.size()) +
                         " value buffers for " + std::to_string(params.size()) + " parameters");
  }
}

template <typename Real>
Var<Real> Binder<Real>::operator()(std::size_t index) {
  if (bound_.at(index) >= 0) return {tape_, static_cast<std::size_t>(bound_[index])};
  const auto& p = (*params_)[index];
  std::vector<Real> data;
  if (values_) {
    data = (*values_)[index];
  } else {
    data.assign(p.value.data.begin(), p.value.data.end());
  }
  auto v = tape_->leaf(p.value.shape, std::move(data));
  bound_[index] = static_cast<std::ptrdiff_t>(v.id);
  return v;
}

template <typename Real>
std::vector<Real> Binder<Real>::grad(std::size_t index) const {
  const auto& p = (*params_)[index];
  if (bound_.at(index) < 0) return std::vector<Real>(p.value.size(), Real(0));
  const auto& g = tape_->node(static_cast<std::size_t>(bound_[index])).grad;
  if (g.empty()) return std::vector<Real>(p.value.size(), Real(0));
  return g;
}

template <typename Real>
void Binder<Real>::accumulate_into(ParameterSet& target) const {
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i] < 0) continue;
    const auto& g = tape_->node(static_cast<std::size_t>(bound_[i])).grad;
    auto& dst = target[i].value.grad;
    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += static_cast<float>(g[j]);
  }
}

template class Binder<float>;
template class Binder<double>;

#define MVF_INSTANTIATE_OPS(R)                                                             \
  template Var<R> matmul(Var<R>, Var<R>);                                                  \
  template Var<R> transpose(Var<R>);                                                       \
  template Var<R> add(Var<R>, Var<R>);                                                     \
  template Var<R> add_bias(Var<R>, Var<R>);                                                \
  template Var<R> mul(Var<R>, Var<R>);                                                     \
  template Var<R> scale(Var<R>, R);                                                        \
  template Var<R> sum(Var<R>);                                                             \
  template Var<R> softmax(Var<R>, std::size_t);                                            \
  template Var<R> layer_norm(Var<R>, Var<R>, Var<R>, R);                                   \
  template Var<R> gelu(Var<R>);                                                            \
  template Var<R> concat(const std::vector<Var<R>>&, std::size_t);                         \
  template Var<R> narrow(Var<R>, std::size_t, std::size_t, std::size_t);                   \
  template Var<R> reshape(Var<R>, Shape);                                                  \
  template Var<R> take_rows(Var<R>, const std::vector<std::size_t>&);                      \
  template Var<R> mean_row_groups(Var<R>, std::size_t);                                    \
  template AttentionResult<R> scaled_dot_attention(Var<R>, Var<R>, Var<R>);

MVF_INSTANTIATE_OPS(float)
MVF_INSTANTIATE_OPS(double)

#undef MVF_INSTANTIATE_OPS

}  // namespace mvf

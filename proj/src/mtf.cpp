#include "mvf/mtf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvf {

namespace {

std::size_t lookup(const ParameterSet& params, const std::string& name, const Shape& shape) {
  const auto idx = params.find(name);
  if (idx == params.size()) throw std::invalid_argument("missing parameter " + name);
  if (params[idx].value.shape != shape) {
    throw DimensionError("parameter " + name + " has shape " +
                         shape_str(params[idx].value.shape) + ", expected " + shape_str(shape));
  }
  return idx;
}

// Either registers a fresh parameter (rng != nullptr) or looks it up.
class Registrar {
 public:
  Registrar(ParameterSet* mut, const ParameterSet& params, Rng* rng)
      : mut_(mut), params_(params), rng_(rng) {}

  std::size_t weight(const std::string& name, std::size_t in, std::size_t out) {
    if (!rng_) return lookup(params_, name, {in, out});
    return mut_->add(name, TensorF32({in, out},
                                     normal_vector(*rng_, in * out, 1.0 / std::sqrt(double(in)))));
  }
  std::size_t filled(const std::string& name, std::size_t n, float value) {
    if (!rng_) return lookup(params_, name, {n});
    return mut_->add(name, TensorF32({n}, std::vector<float>(n, value)));
  }

 private:
  ParameterSet* mut_;
  const ParameterSet& params_;
  Rng* rng_;
};

}  // namespace

std::string to_string(Pooling mode) {
  return mode == Pooling::cls_style ? "cls_style" : "average";
}

Pooling parse_pooling(const std::string& text) {
  if (text == "cls_style") return Pooling::cls_style;
  if (text == "average") return Pooling::average;
  throw std::invalid_argument("unknown pooling mode '" + text + "' (cls_style|average)");
}

void MtfConfig::validate() const {
  if (entities == 0 || model_dim == 0 || fusion_dim == 0 || mlp_ratio == 0) {
    throw std::invalid_argument("MTF dimensions must be positive");
  }
  if (blocks == 0) throw std::invalid_argument("MTF needs at least one block");
  if (heads == 0 || fusion_dim % heads != 0) {
    throw std::invalid_argument("fusion_dim " + std::to_string(fusion_dim) +
                                " is not divisible by " + std::to_string(heads) + " heads");
  }
}

std::vector<std::int64_t> sequence_positions(std::size_t n) {
  std::vector<std::int64_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::int64_t(i);
  return p;
}

std::vector<double> positional_encoding(std::int64_t timestamp, std::size_t dim) {
  std::vector<double> pe(dim);
  for (std::size_t i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -double(i) / double(dim));
    pe[i] = std::sin(double(timestamp) * freq);
    if (i + 1 < dim) pe[i + 1] = std::cos(double(timestamp) * freq);
  }
  return pe;
}

template <typename Real>
Var<Real> build_frame_tokens(Var<Real> features, std::span<const std::int64_t> positions,
                             const MtfConfig& config) {
  const std::size_t T = positions.size(), E = config.entities, d = config.model_dim;
  if (features.shape().size() != 2 || features.rows() != T * E) {
    throw DimensionError("expected " + std::to_string(T) + " frames x " + std::to_string(E) +
                         " entities, got features " + shape_str(features.shape()));
  }
  if (features.cols() != d) {
    throw DimensionError("entity features have width " + std::to_string(features.cols()) +
                         ", MTF expects " + std::to_string(d));
  }
  auto& tape = *features.tape;
  std::vector<Real> ids(T * E * E, Real(0));
  for (std::size_t r = 0; r < T * E; ++r) ids[r * E + r % E] = Real(1);
  std::vector<Real> pe(T * E * (d + E), Real(0));
  for (std::size_t t = 0; t < T; ++t) {
    const auto enc = positional_encoding(positions[t], d);
    for (std::size_t e = 0; e < E; ++e) {
      std::transform(enc.begin(), enc.end(), pe.begin() + (t * E + e) * (d + E),
                     [](double v) { return Real(v); });
    }
  }
  auto tagged = concat<Real>({features, tape.constant({T * E, E}, std::move(ids))}, 1);
  return add(tagged, tape.constant({T * E, d + E}, std::move(pe)));
}

FusionTransformer::FusionTransformer(const MtfConfig& config, ParameterSet& params, Rng& rng)
    : config_(config) {
  config.validate();
  Registrar reg(&params, params, &rng);
  register_params(reg);
}

FusionTransformer::FusionTransformer(const MtfConfig& config, const ParameterSet& params)
    : config_(config) {
  config.validate();
  Registrar reg(nullptr, params, nullptr);
  register_params(reg);
}

template <typename Reg>
void FusionTransformer::register_params(Reg& reg) {
  const auto F = config_.fusion_dim, H = config_.mlp_ratio * F;
  in_weight_ = reg.weight("mtf.in.weight", config_.token_dim(), F);
  in_bias_ = reg.filled("mtf.in.bias", F, 0.f);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string p = "mtf.b" + std::to_string(b) + ".";
    Block blk{};
    blk.ln1_gamma = reg.filled(p + "ln1.gamma", F, 1.f);
    blk.ln1_beta = reg.filled(p + "ln1.beta", F, 0.f);
    blk.qkv_weight = reg.weight(p + "attn.qkv.weight", F, 3 * F);
    blk.qkv_bias = reg.filled(p + "attn.qkv.bias", 3 * F, 0.f);
    blk.out_weight = reg.weight(p + "attn.out.weight", F, F);
    blk.out_bias = reg.filled(p + "attn.out.bias", F, 0.f);
    blk.ln2_gamma = reg.filled(p + "ln2.gamma", F, 1.f);
    blk.ln2_beta = reg.filled(p + "ln2.beta", F, 0.f);
    blk.fc1_weight = reg.weight(p + "mlp.fc1.weight", F, H);
    blk.fc1_bias = reg.filled(p + "mlp.fc1.bias", H, 0.f);
    blk.fc2_weight = reg.weight(p + "mlp.fc2.weight", H, F);
    blk.fc2_bias = reg.filled(p + "mlp.fc2.bias", F, 0.f);
    blocks_.push_back(blk);
  }
  final_gamma_ = reg.filled("mtf.final.gamma", F, 1.f);
  final_beta_ = reg.filled("mtf.final.beta", F, 0.f);
}

std::size_t FusionTransformer::parameter_count(const MtfConfig& c) {
  const std::size_t F = c.fusion_dim, H = c.mlp_ratio * F;
  const std::size_t block = 2 * F + (F * 3 * F + 3 * F) + (F * F + F) + 2 * F + (F * H + H) +
                            (H * F + F);
  return c.token_dim() * F + F + c.blocks * block + 2 * F;
}

template <typename Real>
Var<Real> FusionTransformer::canonical_order(Var<Real> tokens,
                                             std::vector<std::size_t>& order) const {
  const std::size_t E = config_.entities, n = tokens.rows(), w = tokens.cols();
  auto v = tokens.value();
  order.resize(n);
  std::iota(order.begin(), order.end(), 0);
  bool identity = true;
  for (std::size_t base = 0; base < n; base += E) {
    auto id_of = [&](std::size_t row) {
      const Real* ids = v.data() + row * w + (w - E);
      return static_cast<std::size_t>(std::max_element(ids, ids + E) - ids);
    };
    std::stable_sort(order.begin() + base, order.begin() + base + E,
                     [&](std::size_t a, std::size_t b) { return id_of(a) < id_of(b); });
    for (std::size_t i = base; i < base + E; ++i) identity = identity && order[i] == i;
  }
  return identity ? tokens : take_rows(tokens, order);
}

template <typename Real>
Var<Real> FusionTransformer::forward(Binder<Real>& bind, Var<Real> tokens) const {
  const auto E = config_.entities, F = config_.fusion_dim, heads = config_.heads;
  if (tokens.shape().size() != 2 || tokens.cols() != config_.token_dim() ||
      tokens.rows() % E != 0) {
    throw DimensionError("fusion transformer expects [(T*" + std::to_string(E) + ") x " +
                         std::to_string(config_.token_dim()) + "] tokens, got " +
                         shape_str(tokens.shape()));
  }
  constexpr Real eps = Real(1e-5);
  std::vector<std::size_t> order;
  auto x = canonical_order(tokens, order);
  x = add_bias(matmul(x, bind(in_weight_)), bind(in_bias_));
  const std::size_t dh = F / heads;
  for (const auto& blk : blocks_) {
    auto h = layer_norm(x, bind(blk.ln1_gamma), bind(blk.ln1_beta), eps);
    auto qkv = add_bias(matmul(h, bind(blk.qkv_weight)), bind(blk.qkv_bias));
    std::vector<Var<Real>> per_head;
    per_head.reserve(heads);
    for (std::size_t i = 0; i < heads; ++i) {
      auto q = narrow(qkv, 1, i * dh, dh);
      auto k = narrow(qkv, 1, F + i * dh, dh);
      auto v = narrow(qkv, 1, 2 * F + i * dh, dh);
      per_head.push_back(scaled_dot_attention(q, k, v).output);
    }
    auto att = heads == 1 ? per_head.front() : concat(per_head, 1);
    x = add(x, add_bias(matmul(att, bind(blk.out_weight)), bind(blk.out_bias)));
    auto m = layer_norm(x, bind(blk.ln2_gamma), bind(blk.ln2_beta), eps);
    m = gelu(add_bias(matmul(m, bind(blk.fc1_weight)), bind(blk.fc1_bias)));
    x = add(x, add_bias(matmul(m, bind(blk.fc2_weight)), bind(blk.fc2_bias)));
  }
  x = layer_norm(x, bind(final_gamma_), bind(final_beta_), eps);

  bool identity = true;
  for (std::size_t i = 0; i < order.size(); ++i) identity = identity && order[i] == i;
  if (identity) return x;
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = i;
  return take_rows(x, inverse);
}

template <typename Real>
Var<Real> pool_output(Var<Real> outputs, std::size_t entities, Pooling mode) {
  if (outputs.shape().size() != 2 || entities == 0 || outputs.rows() % entities != 0) {
    throw DimensionError("cannot pool " + shape_str(outputs.shape()) + " over " +
                         std::to_string(entities) + " entities");
  }
  if (entities == 1) return outputs;
  if (mode == Pooling::average) return mean_row_groups(outputs, entities);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < outputs.rows(); r += entities) rows.push_back(r);
  return take_rows(outputs, rows);
}

FixedWidthBaseline::FixedWidthBaseline(std::size_t channels, std::size_t splits,
                                       std::size_t model_dim, ParameterSet& params, Rng& rng)
    : channels_(channels), splits_(splits), model_dim_(model_dim) {
  if (splits == 0) throw std::invalid_argument("fixed-width baseline needs at least one split");
  weight_ = params.add("fwb.split.weight",
                       TensorF32({channels, splits * model_dim},
                                 normal_vector(rng, channels * splits * model_dim,
                                               1.0 / std::sqrt(double(channels)))));
  bias_ = params.add("fwb.split.bias", TensorF32::zeros({splits * model_dim}));
}

FixedWidthBaseline::FixedWidthBaseline(std::size_t channels, std::size_t splits,
                                       std::size_t model_dim, const ParameterSet& params)
    : channels_(channels), splits_(splits), model_dim_(model_dim) {
  weight_ = lookup(params, "fwb.split.weight", {channels, splits * model_dim});
  bias_ = lookup(params, "fwb.split.bias", {splits * model_dim});
}

template <typename Real>
Var<Real> FixedWidthBaseline::split_tokens(Binder<Real>& bind, const VideoFeatures& video,
                                           std::span<const std::size_t> frames) const {
  if (video.channels != channels_) {
    throw DimensionError("fixed-width baseline expects " + std::to_string(channels_) +
                         " channels, video '" + video.video_id + "' has " +
                         std::to_string(video.channels));
  }
  const std::size_t T = frames.size(), S = video.num_tokens, D = video.channels;
  const std::size_t last = video.num_layers - 1;
  std::vector<Real> pooled(T * D, Real(0));
  for (std::size_t i = 0; i < T; ++i) {
    if (frames[i] >= video.num_frames) throw DimensionError("frame index out of range");
    auto g = video.grid(frames[i], last);
    for (std::size_t c = 0; c < D; ++c) {
      double acc = 0;
      for (std::size_t s = 0; s < S; ++s) acc += g[s * D + c];
      pooled[i * D + c] = Real(acc / double(S));
    }
  }
  auto x = bind.tape().constant({T, D}, std::move(pooled));
  auto split = add_bias(matmul(x, bind(weight_)), bind(bias_));
  return reshape(split, {T * splits_, model_dim_});
}

template <typename Real>
Var<Real> fwb_forward(const FixedWidthBaseline& fwb, const FusionTransformer& fusion,
                      Binder<Real>& bind, const VideoFeatures& video,
                      std::span<const std::size_t> frames) {
  if (fusion.config().entities != fwb.splits()) {
    throw DimensionError("fusion transformer configured for " +
                         std::to_string(fusion.config().entities) + " tokens per frame, FWB emits " +
                         std::to_string(fwb.splits()));
  }
  const auto positions = sequence_positions(frames.size());
  auto tokens =
      build_frame_tokens(fwb.split_tokens(bind, video, frames), positions, fusion.config());
  return pool_output(fusion.forward(bind, tokens), fwb.splits(), fusion.config().pooling);
}

#define MVF_INSTANTIATE_MTF(R)                                                              \
  template Var<R> build_frame_tokens(Var<R>, std::span<const std::int64_t>, const MtfConfig&); \
  template Var<R> FusionTransformer::forward(Binder<R>&, Var<R>) const;                     \
  template Var<R> FusionTransformer::canonical_order(Var<R>, std::vector<std::size_t>&) const; \
  template Var<R> pool_output(Var<R>, std::size_t, Pooling);                                \
  template Var<R> FixedWidthBaseline::split_tokens(Binder<R>&, const VideoFeatures&,        \
                                                   std::span<const std::size_t>) const;     \
  template Var<R> fwb_forward(const FixedWidthBaseline&, const FusionTransformer&, Binder<R>&, \
                              const VideoFeatures&, std::span<const std::size_t>);

MVF_INSTANTIATE_MTF(float)
MVF_INSTANTIATE_MTF(double)

#undef MVF_INSTANTIATE_MTF

}  // namespace mvf

#include "mvf/lstp.hpp"

#include <cmath>

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

std::string layer_name(std::size_t l, const char* what) {
  return "lstp.l" + std::to_string(l) + "." + what;
}

}  // namespace

Lstp::Lstp(const LstpConfig& config, ParameterSet& params, Rng& rng) : config_(config) {
  if (config.entities == 0 || config.layers == 0) {
    throw std::invalid_argument("LSTP needs at least one entity and one layer");
  }
  const auto E = config.entities, D = config.channels, dq = config.query_dim,
             dv = config.value_dim, L = config.layers;
  for (std::size_t l = 0; l < L; ++l) {
    LayerParams lp{};
    lp.query = params.add(layer_name(l, "query"),
                          TensorF32({E, dq}, normal_vector(rng, E * dq, 1.0 / std::sqrt(double(dq)))));
    lp.key = params.add(layer_name(l, "key"),
                        TensorF32({D, dq}, normal_vector(rng, D * dq, 1.0 / std::sqrt(double(D)))));
    lp.value = params.add(layer_name(l, "value"),
                          TensorF32({D, dv}, normal_vector(rng, D * dv, 1.0 / std::sqrt(double(D)))));
    layer_params_.push_back(lp);
  }
  out_weight_ = params.add(
      "lstp.out.weight",
      TensorF32({L * dv, config.model_dim},
                normal_vector(rng, L * dv * config.model_dim, 1.0 / std::sqrt(double(L * dv)))));
  out_bias_ = params.add("lstp.out.bias", TensorF32::zeros({config.model_dim}));
}

Lstp::Lstp(const LstpConfig& config, const ParameterSet& params) : config_(config) {
  const auto E = config.entities, D = config.channels, dq = config.query_dim,
             dv = config.value_dim, L = config.layers;
  for (std::size_t l = 0; l < L; ++l) {
    layer_params_.push_back({lookup(params, layer_name(l, "query"), {E, dq}),
                             lookup(params, layer_name(l, "key"), {D, dq}),
                             lookup(params, layer_name(l, "value"), {D, dv})});
  }
  out_weight_ = lookup(params, "lstp.out.weight", {L * dv, config.model_dim});
  out_bias_ = lookup(params, "lstp.out.bias", {config.model_dim});
}

template <typename Real>
EntitySet<Real> Lstp::forward(Binder<Real>& bind, const VideoFeatures& video,
                              std::span<const std::size_t> frames) const {
  if (video.num_layers != config_.layers || video.channels != config_.channels) {
    throw DimensionError("LSTP configured for " + std::to_string(config_.layers) + " layers x " +
                         std::to_string(config_.channels) + " channels, video '" +
                         video.video_id + "' has " + std::to_string(video.num_layers) + " x " +
                         std::to_string(video.channels));
  }
  if (frames.empty()) throw DimensionError("LSTP needs at least one frame");
  auto& tape = bind.tape();
  const std::size_t T = frames.size(), S = video.num_tokens, D = video.channels;
  const std::size_t E = config_.entities, L = config_.layers;

  EntitySet<Real> out;
  out.frames = T;
  out.entities = E;
  out.layers = L;
  out.tokens = S;
  out.attention.resize(T * L * E * S);

  std::vector<Var<Real>> per_layer;
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<Real> grids;
    grids.reserve(T * S * D);
    for (auto t : frames) {
      if (t >= video.num_frames) {
        throw DimensionError("frame " + std::to_string(t) + " out of range for video '" +
                             video.video_id + "'");
      }
      auto g = video.grid(t, l);
      grids.insert(grids.end(), g.begin(), g.end());
    }
    auto x = tape.constant({T * S, D}, std::move(grids));
    auto keys = matmul(x, bind(layer_params_[l].key));
    auto values = matmul(x, bind(layer_params_[l].value));
    auto queries = bind(layer_params_[l].query);
    std::vector<Var<Real>> per_frame;
    per_frame.reserve(T);
    for (std::size_t i = 0; i < T; ++i) {
      auto att = scaled_dot_attention(queries, narrow(keys, 0, i * S, S),
                                      narrow(values, 0, i * S, S));
      auto w = att.weights.value();
      std::copy(w.begin(), w.end(), out.attention.begin() + (i * L + l) * E * S);
      per_frame.push_back(att.output);
    }
    per_layer.push_back(concat(per_frame, 0));
  }
  auto stacked = L == 1 ? per_layer.front() : concat(per_layer, 1);
  out.features = add_bias(matmul(stacked, bind(out_weight_)), bind(out_bias_));
  return out;
}

template <typename Real>
EntitySet<Real> lstp1_forward(const Lstp& lstp, Binder<Real>& bind, const VideoFeatures& video,
                              std::span<const std::size_t> frames) {
  if (lstp.config().entities != 1) {
    throw DimensionError("LSTP-1 requires exactly one entity, configured with " +
                         std::to_string(lstp.config().entities));
  }
  return lstp.forward(bind, video, frames);
}

template <typename Real>
AttentionMap attention_map(const EntitySet<Real>& entities, std::size_t frame,
                           std::size_t layer, std::size_t entity) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(double(entities.tokens))));
  if (side * side != entities.tokens) {
    throw DimensionError("attention over " + std::to_string(entities.tokens) +
                         " tokens is not a square grid");
  }
  auto row = entities.attention_row(frame, layer, entity);
  return {side, std::vector<float>(row.begin(), row.end())};
}

template EntitySet<float> Lstp::forward(Binder<float>&, const VideoFeatures&,
                                        std::span<const std::size_t>) const;
template EntitySet<double> Lstp::forward(Binder<double>&, const VideoFeatures&,
                                         std::span<const std::size_t>) const;
template EntitySet<float> lstp1_forward(const Lstp&, Binder<float>&, const VideoFeatures&,
                                        std::span<const std::size_t>);
template EntitySet<double> lstp1_forward(const Lstp&, Binder<double>&, const VideoFeatures&,
                                         std::span<const std::size_t>);
template AttentionMap attention_map(const EntitySet<float>&, std::size_t, std::size_t,
                                    std::size_t);
template AttentionMap attention_map(const EntitySet<double>&, std::size_t, std::size_t,
                                    std::size_t);

}  // namespace mvf

#pragma once

// Learnable spatial token pooling: E learned queries per backbone layer
// cross-attend over the spatial tokens of every frame. The queries are
// parameters, so they are identical for every frame of every video; entity
// e is whatever query e has learned to pick out.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvf/autodiff.hpp"
#include "mvf/features.hpp"
#include "mvf/random.hpp"

namespace mvf {

struct LstpConfig {
  std::size_t entities = 3;
  std::size_t layers = 3;
  std::size_t channels = 32;
  std::size_t query_dim = 64;
  std::size_t value_dim = 64;
  std::size_t model_dim = 128;
};

template <typename Real>
struct EntitySet {
  std::size_t frames = 0;
  std::size_t entities = 0;
  std::size_t layers = 0;
  std::size_t tokens = 0;
  /// [(frames * entities) x model_dim], row t*E + e.
  Var<Real> features;
  /// [frame][layer][entity][token]; each (frame, layer, entity) row sums to one.
  std::vector<float> attention;

  std::span<const float> attention_row(std::size_t frame, std::size_t layer,
                                       std::size_t entity) const {
    return std::span<const float>(attention).subspan(
        ((frame * layers + layer) * entities + entity) * tokens, tokens);
  }
};

class Lstp {
 public:
  /// Registers lstp.l{l}.{query,key,value} and lstp.out.{weight,bias}.
  Lstp(const LstpConfig& config, ParameterSet& params, Rng& rng);
  /// Binds to parameters already present in `params` (e.g. after loading).
  Lstp(const LstpConfig& config, const ParameterSet& params);

  const LstpConfig& config() const { return config_; }

  /// Pools the listed frames of `video` into E entities each.
  template <typename Real>
  EntitySet<Real> forward(Binder<Real>& bind, const VideoFeatures& video,
                          std::span<const std::size_t> frames) const;

  std::size_t query_param(std::size_t layer) const { return layer_params_[layer].query; }
  std::size_t key_param(std::size_t layer) const { return layer_params_[layer].key; }
  std::size_t value_param(std::size_t layer) const { return layer_params_[layer].value; }
  std::size_t out_weight_param() const { return out_weight_; }
  std::size_t out_bias_param() const { return out_bias_; }

 private:
  struct LayerParams {
    std::size_t query, key, value;
  };
  LstpConfig config_;
  std::vector<LayerParams> layer_params_;
  std::size_t out_weight_ = 0;
  std::size_t out_bias_ = 0;
};

/// Single-entity pooling; identical to Lstp::forward but insists on E = 1.
template <typename Real>
EntitySet<Real> lstp1_forward(const Lstp& lstp, Binder<Real>& bind, const VideoFeatures& video,
                              std::span<const std::size_t> frames);

// ---- attention maps ----------------------------------------------------

struct AttentionMap {
  std::size_t grid_side = 0;
  std::vector<float> values;  // row-major G x G
};

/// Requires a square token grid.
template <typename Real>
AttentionMap attention_map(const EntitySet<Real>& entities, std::size_t frame,
                           std::size_t layer, std::size_t entity);

/// Binary PGM, min-max scaled to [0, 255]; a constant map renders as 128.
std::vector<std::uint8_t> encode_pgm(const AttentionMap& map);
void export_attention(const AttentionMap& map, const std::filesystem::path& path);
std::string attention_file_name(const std::string& video_id, std::size_t frame,
                                std::size_t entity, std::size_t layer);

}  // namespace mvf

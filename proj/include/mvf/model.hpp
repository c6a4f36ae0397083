#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mvf/lstp.hpp"
#include "mvf/mtf.hpp"

namespace mvf {

enum class Architecture { mvformer, fixed_width };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);

/// Dimensions of the full frozen-backbone -> pooling -> fusion -> head stack.
/// For the fixed-width baseline `entities` is the split count N.
struct ModelConfig {
  Architecture architecture = Architecture::mvformer;
  std::size_t entities = 3;
  std::size_t layers = 3;
  std::size_t channels = 32;
  std::size_t query_dim = 64;
  std::size_t value_dim = 64;
  std::size_t model_dim = 128;
  std::size_t fusion_dim = 128;
  std::size_t blocks = 3;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  Pooling pooling = Pooling::cls_style;
  std::size_t projection_dim = 128;

  LstpConfig lstp() const;
  MtfConfig mtf() const;
};

template <typename Real>
struct ModelOutput {
  Var<Real> embeddings;  // [T x fusion_dim], pre-projection
  Var<Real> projection;  // [T x projection_dim], consumed by the loss
  std::vector<float> attention;  // LSTP maps; empty for the fixed-width baseline
};

class MvFormer {
 public:
  MvFormer(const ModelConfig& config, std::uint64_t seed);
  /// Rebuilds a model around loaded parameters; throws CheckpointError if
  /// names or shapes disagree with `config`.
  MvFormer(const ModelConfig& config, const ParameterSet& loaded);

  MvFormer(const MvFormer& other);
  MvFormer& operator=(const MvFormer& other);
  MvFormer(MvFormer&&) noexcept = default;
  MvFormer& operator=(MvFormer&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Lstp* lstp() const { return lstp_ ? &*lstp_ : nullptr; }
  const FixedWidthBaseline* fwb() const { return fwb_ ? &*fwb_ : nullptr; }
  const FusionTransformer& fusion() const { return *fusion_; }

  template <typename Real>
  ModelOutput<Real> forward(Binder<Real>& bind, const VideoFeatures& video,
                            std::span<const std::size_t> frames) const;

  /// Frozen per-frame embeddings of every frame of `video`.
  FrameEmbeddingSequence embed(const VideoFeatures& video) const;
  /// LSTP entity set (float) for every frame, for attention export.
  EntitySet<float> entities(Tape<float>& tape, const VideoFeatures& video) const;

 private:
  void wire();

  ModelConfig config_;
  ParameterSet params_;
  std::optional<Lstp> lstp_;
  std::optional<FixedWidthBaseline> fwb_;
  std::optional<FusionTransformer> fusion_;
  std::size_t head_fc1_w_ = 0, head_fc1_b_ = 0, head_fc2_w_ = 0, head_fc2_b_ = 0;
};

}  // namespace mvf

#pragma once

// Multi-entity temporal fusion: every entity of every frame becomes one
// token tagged with a one-hot entity ID, a pre-norm transformer attends over
// all T*E tokens jointly, and the outputs are pooled back to one embedding
// per frame.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvf/autodiff.hpp"
#include "mvf/features.hpp"
#include "mvf/random.hpp"

namespace mvf {

enum class Pooling { cls_style, average };

std::string to_string(Pooling mode);
Pooling parse_pooling(const std::string& text);

struct MtfConfig {
  std::size_t entities = 3;
  std::size_t model_dim = 128;   // entity feature width
  std::size_t fusion_dim = 128;  // transformer width after the input projection
  std::size_t blocks = 3;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  Pooling pooling = Pooling::cls_style;

  /// Entity feature plus the appended one-hot ID.
  std::size_t token_dim() const { return model_dim + entities; }
  void validate() const;
};

/// Per-frame output embeddings, row-major [frames x dim].
struct FrameEmbeddingSequence {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(values).subspan(t * dim, dim);
  }
};

/// Positions 0..n-1.
std::vector<std::int64_t> sequence_positions(std::size_t n);

/// Sinusoidal encoding of `position` over `dim` coordinates:
/// [2i] = sin(t / 10000^(2i/dim)), [2i+1] = cos(t / 10000^(2i/dim)).
std::vector<double> positional_encoding(std::int64_t position, std::size_t dim);

/// token(t, e) = [feature(t, e), onehot(e)] + [pe(t), 0...0].
/// `features` is [(T*E) x model_dim] with row t*E + e.
/// `positions` index the frames of the fused sequence; the model passes
/// 0..T-1 for every view rather than source frame numbers.
template <typename Real>
Var<Real> build_frame_tokens(Var<Real> features, std::span<const std::int64_t> positions,
                             const MtfConfig& config);

class FusionTransformer {
 public:
  FusionTransformer(const MtfConfig& config, ParameterSet& params, Rng& rng);
  FusionTransformer(const MtfConfig& config, const ParameterSet& params);

  const MtfConfig& config() const { return config_; }

  /// B pre-norm blocks over all tokens; returns [(T*E) x fusion_dim] in the
  /// input row order. Tokens of a frame are processed in entity-ID order, so
  /// reordering tokens within a frame (IDs included) reorders the outputs
  /// without changing any value.
  template <typename Real>
  Var<Real> forward(Binder<Real>& bind, Var<Real> tokens) const;

  /// Scalar weights owned by the transformer (the "mtf." parameters).
  static std::size_t parameter_count(const MtfConfig& config);

 private:
  struct Block {
    std::size_t ln1_gamma, ln1_beta, qkv_weight, qkv_bias, out_weight, out_bias;
    std::size_t ln2_gamma, ln2_beta, fc1_weight, fc1_bias, fc2_weight, fc2_bias;
  };
  template <typename Reg>
  void register_params(Reg& reg);
  template <typename Real>
  Var<Real> canonical_order(Var<Real> tokens, std::vector<std::size_t>& order) const;

  MtfConfig config_;
  std::size_t in_weight_ = 0, in_bias_ = 0;
  std::vector<Block> blocks_;
  std::size_t final_gamma_ = 0, final_beta_ = 0;
};

/// cls_style keeps entity 0 of each frame; average takes the mean over the
/// frame's E tokens.
template <typename Real>
Var<Real> pool_output(Var<Real> outputs, std::size_t entities, Pooling mode);

/// Fixed-width baseline: the mean of the last layer's spatial tokens is split
/// into N tokens by one linear layer, giving the fusion transformer the same
/// token width as MTF with E = N but without spatial pooling.
class FixedWidthBaseline {
 public:
  FixedWidthBaseline(std::size_t channels, std::size_t splits, std::size_t model_dim,
                     ParameterSet& params, Rng& rng);
  FixedWidthBaseline(std::size_t channels, std::size_t splits, std::size_t model_dim,
                     const ParameterSet& params);

  /// [(T*N) x model_dim], row t*N + n.
  template <typename Real>
  Var<Real> split_tokens(Binder<Real>& bind, const VideoFeatures& video,
                         std::span<const std::size_t> frames) const;

  std::size_t weight_param() const { return weight_; }
  std::size_t bias_param() const { return bias_; }
  std::size_t splits() const { return splits_; }

 private:
  std::size_t channels_, splits_, model_dim_;
  std::size_t weight_ = 0, bias_ = 0;
};

/// split -> ID tagging -> fusion -> pooling; [T x fusion_dim].
template <typename Real>
Var<Real> fwb_forward(const FixedWidthBaseline& fwb, const FusionTransformer& fusion,
                      Binder<Real>& bind, const VideoFeatures& video,
                      std::span<const std::size_t> frames);

// ---- checkpoints -------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

/// Copies `loaded` into `target`, requiring identical names and shapes;
/// any difference raises CheckpointError naming the parameter.
void assign_parameters(ParameterSet& target, const ParameterSet& loaded);

}  // namespace mvf

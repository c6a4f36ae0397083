#include "mvf/model.hpp"

#include <cmath>
#include <numeric>

namespace mvf {

std::string to_string(Architecture arch) {
  return arch == Architecture::mvformer ? "mvformer" : "fwb";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "mvformer") return Architecture::mvformer;
  if (text == "fwb") return Architecture::fixed_width;
  throw std::invalid_argument("unknown architecture '" + text + "' (mvformer|fwb)");
}

LstpConfig ModelConfig::lstp() const {
  return {entities, layers, channels, query_dim, value_dim, model_dim};
}

MtfConfig ModelConfig::mtf() const {
  return {entities, model_dim, fusion_dim, blocks, heads, mlp_ratio, pooling};
}

MvFormer::MvFormer(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.mtf().validate();
  Rng rng(seed);
  if (config.architecture == Architecture::mvformer) {
    Lstp(config.lstp(), params_, rng);
  } else {
    FixedWidthBaseline(config.channels, config.entities, config.model_dim, params_, rng);
  }
  FusionTransformer(config.mtf(), params_, rng);
  const auto F = config.fusion_dim, P = config.projection_dim;
  params_.add("head.fc1.weight",
              TensorF32({F, F}, normal_vector(rng, F * F, 1.0 / std::sqrt(double(F)))));
  params_.add("head.fc1.bias", TensorF32::zeros({F}));
  params_.add("head.fc2.weight",
              TensorF32({F, P}, normal_vector(rng, F * P, 1.0 / std::sqrt(double(F)))));
  params_.add("head.fc2.bias", TensorF32::zeros({P}));
  wire();
}

MvFormer::MvFormer(const ModelConfig& config, const ParameterSet& loaded) : MvFormer(config, 0) {
  assign_parameters(params_, loaded);
}

MvFormer::MvFormer(const MvFormer& other) : config_(other.config_), params_(other.params_) {
  wire();
}

MvFormer& MvFormer::operator=(const MvFormer& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    wire();
  }
  return *this;
}

void MvFormer::wire() {
  const ParameterSet& ps = params_;
  lstp_.reset();
  fwb_.reset();
  if (config_.architecture == Architecture::mvformer) {
    lstp_.emplace(config_.lstp(), ps);
  } else {
    fwb_.emplace(config_.channels, config_.entities, config_.model_dim, ps);
  }
  fusion_.emplace(config_.mtf(), ps);
  head_fc1_w_ = ps.find("head.fc1.weight");
  head_fc1_b_ = ps.find("head.fc1.bias");
  head_fc2_w_ = ps.find("head.fc2.weight");
  head_fc2_b_ = ps.find("head.fc2.bias");
}

template <typename Real>
ModelOutput<Real> MvFormer::forward(Binder<Real>& bind, const VideoFeatures& video,
                                    std::span<const std::size_t> frames) const {
  ModelOutput<Real> out;
  if (lstp_) {
    auto ents = lstp_->forward(bind, video, frames);
    const auto positions = sequence_positions(frames.size());
    auto tokens = build_frame_tokens(ents.features, positions, fusion_->config());
    out.embeddings = pool_output(fusion_->forward(bind, tokens), config_.entities, config_.pooling);
    out.attention = std::move(ents.attention);
  } else {
    out.embeddings = fwb_forward(*fwb_, *fusion_, bind, video, frames);
  }
  auto h = gelu(add_bias(matmul(out.embeddings, bind(head_fc1_w_)), bind(head_fc1_b_)));
  out.projection = add_bias(matmul(h, bind(head_fc2_w_)), bind(head_fc2_b_));
  return out;
}

FrameEmbeddingSequence MvFormer::embed(const VideoFeatures& video) const {
  Tape<float> tape;
  Binder<float> bind(tape, params_);
  std::vector<std::size_t> frames(video.num_frames);
  std::iota(frames.begin(), frames.end(), 0);
  auto out = forward(bind, video, frames);
  auto v = out.embeddings.value();
  return {video.num_frames, out.embeddings.cols(), std::vector<float>(v.begin(), v.end())};
}

EntitySet<float> MvFormer::entities(Tape<float>& tape, const VideoFeatures& video) const {
  if (!lstp_) throw std::logic_error("the fixed-width baseline has no LSTP attention");
  Binder<float> bind(tape, params_);
  std::vector<std::size_t> frames(video.num_frames);
  std::iota(frames.begin(), frames.end(), 0);
  return lstp_->forward(bind, video, frames);
}

template ModelOutput<float> MvFormer::forward(Binder<float>&, const VideoFeatures&,
                                              std::span<const std::size_t>) const;
template ModelOutput<double> MvFormer::forward(Binder<double>&, const VideoFeatures&,
                                               std::span<const std::size_t>) const;

}  // namespace mvf

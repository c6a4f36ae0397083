#include "mvf/features.hpp"

#include <algorithm>

namespace mvf {

std::span<const float> VideoFeatures::grid(std::size_t frame, std::size_t layer) const {
  const std::size_t offset = (frame * num_layers + layer) * grid_size();
  return std::span<const float>(data).subspan(offset, grid_size());
}

void VideoFeatures::validate() const {
  if (num_frames == 0 || num_layers == 0 || num_tokens == 0 || channels == 0) {
    throw std::invalid_argument("video '" + video_id + "' has an empty dimension");
  }
  if (data.size() != num_frames * num_layers * num_tokens * channels) {
    throw std::invalid_argument("video '" + video_id + "' payload does not match T*L*S*D");
  }
  if (timestamps.size() != num_frames) {
    throw std::invalid_argument("video '" + video_id + "' needs one timestamp per frame");
  }
  for (std::size_t t = 1; t < timestamps.size(); ++t) {
    if (timestamps[t] <= timestamps[t - 1]) {
      throw std::invalid_argument("video '" + video_id + "' timestamps not strictly increasing");
    }
  }
  if (annotations && (annotations->labels.size() != num_frames ||
                      annotations->progression.size() != num_frames)) {
    throw std::invalid_argument("video '" + video_id + "' annotations do not cover all frames");
  }
}

VideoFeatures select_layers(const VideoFeatures& features,
                            const std::vector<std::size_t>& layer_ids) {
  if (layer_ids.empty()) throw std::out_of_range("select_layers: no layers requested");
  for (std::size_t i = 0; i < layer_ids.size(); ++i) {
    if (layer_ids[i] >= features.num_layers) {
      throw std::out_of_range("select_layers: layer " + std::to_string(layer_ids[i]) +
                              " out of range for " + std::to_string(features.num_layers) +
                              " layers");
    }
    if (i > 0 && layer_ids[i] <= layer_ids[i - 1]) {
      throw std::invalid_argument("select_layers: layer ids must be strictly increasing");
    }
  }
  VideoFeatures out = features;
  out.num_layers = layer_ids.size();
  out.data.clear();
  out.data.reserve(features.num_frames * out.num_layers * features.grid_size());
  for (std::size_t t = 0; t < features.num_frames; ++t) {
    for (auto l : layer_ids) {
      auto g = features.grid(t, l);
      out.data.insert(out.data.end(), g.begin(), g.end());
    }
  }
  return out;
}

}  // namespace mvf

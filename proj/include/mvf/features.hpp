#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvf {

/// Per-frame phase labels and normalized time-to-next-boundary targets.
struct PhaseAnnotations {
  std::vector<std::uint32_t> labels;
  std::vector<float> progression;
};

/// Frozen-backbone token grids for one video.
///
/// `data` is laid out [frame][layer][token][channel], matching the MVFF
/// payload, so grid(t, l) is a contiguous S x D block.
struct VideoFeatures {
  std::string video_id;
  std::size_t num_frames = 0;
  std::size_t num_layers = 0;
  std::size_t num_tokens = 0;
  std::size_t channels = 0;
  std::vector<float> data;
  std::vector<std::int64_t> timestamps;
  std::optional<PhaseAnnotations> annotations;

  std::span<const float> grid(std::size_t frame, std::size_t layer) const;
  std::size_t grid_size() const { return num_tokens * channels; }

  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;
};

/// Keeps exactly the listed layers (0-based, strictly increasing).
VideoFeatures select_layers(const VideoFeatures& features,
                            const std::vector<std::size_t>& layer_ids);

// ---- synthetic backbone ------------------------------------------------

struct SyntheticSpec {
  std::size_t num_videos = 40;
  std::size_t frames = 32;
  std::size_t grid_side = 8;
  std::size_t channels = 32;
  std::size_t num_phases = 4;
  std::size_t actor_patch_side = 3;
  std::size_t num_layers = 3;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Draws shared by every video of a dataset.
struct SyntheticWorld {
  std::vector<float> phase_signatures;  // [phase][channel]
  std::vector<float> layer_maps;        // [layer][in channel][out channel]
};

/// Ground truth that the features were rendered from.
struct SyntheticTruth {
  std::vector<float> background;       // [channel]
  std::vector<std::size_t> actor_row;  // top-left patch corner per frame
  std::vector<std::size_t> actor_col;
  std::vector<float> base_grid;        // [frame][token][channel], before layer maps

  bool in_actor_patch(std::size_t frame, std::size_t token, std::size_t grid_side,
                      std::size_t patch_side) const;
};

struct SyntheticDataset {
  SyntheticSpec spec;
  SyntheticWorld world;
  std::vector<VideoFeatures> videos;
  std::vector<SyntheticTruth> truth;
};

/// Pure function of the spec (including its seed). Noise is drawn from a
/// separate stream, so changing noise_sigma leaves every other draw intact.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec);

// ---- MVFF files --------------------------------------------------------

class MvffError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, version_mismatch, truncated, malformed };
  MvffError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kMvffVersion = 1;

std::vector<std::uint8_t> encode_mvff(const VideoFeatures& features);
/// `video_id` is not stored in the file; callers supply it.
VideoFeatures decode_mvff(std::span<const std::uint8_t> bytes, std::string video_id = {});

void write_mvff(const VideoFeatures& features, const std::filesystem::path& path);
/// The loaded video_id is the file stem.
VideoFeatures load_mvff(const std::filesystem::path& path);

}  // namespace mvf

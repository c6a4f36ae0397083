#include <cmath>

#include "mvf/features.hpp"
#include "mvf/random.hpp"

namespace mvf {

namespace {

constexpr std::uint64_t kWorldStream = 0x1000;
constexpr std::uint64_t kVideoStream = 0x2000;
constexpr std::uint64_t kNoiseStream = 0x3000;

// K contiguous phases, each at least two frames; the remaining frames are
// handed out one at a time to uniformly chosen phases.
std::vector<std::uint32_t> draw_phase_labels(Rng& rng, std::size_t frames, std::size_t phases) {
  std::vector<std::size_t> lengths(phases, 2);
  std::uniform_int_distribution<std::size_t> pick(0, phases - 1);
  for (std::size_t extra = frames - 2 * phases; extra > 0; --extra) ++lengths[pick(rng)];
  std::vector<std::uint32_t> labels;
  labels.reserve(frames);
  for (std::size_t k = 0; k < phases; ++k) labels.insert(labels.end(), lengths[k], std::uint32_t(k));
  return labels;
}

std::vector<float> progression_from_labels(const std::vector<std::uint32_t>& labels) {
  const std::size_t n = labels.size();
  std::vector<float> out(n);
  std::size_t boundary = n;
  for (std::size_t t = n; t-- > 0;) {
    if (t + 1 < n && labels[t + 1] != labels[t]) boundary = t + 1;
    out[t] = static_cast<float>(double(boundary - t) / double(n));
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_videos == 0 || frames == 0 || grid_side == 0 || channels == 0 || num_layers == 0 ||
      actor_patch_side == 0) {
    throw SpecError("synthetic spec counts must be positive");
  }
  if (num_phases < 2) throw SpecError("synthetic spec needs at least 2 phases");
  if (actor_patch_side > grid_side) throw SpecError("actor patch larger than the grid");
  if (!(noise_sigma >= 0.0)) throw SpecError("noise_sigma must be nonnegative");
  if (2 * num_phases > frames) {
    throw SpecError("cannot partition " + std::to_string(frames) + " frames into " +
                    std::to_string(num_phases) + " phases of at least 2 frames");
  }
}

bool SyntheticTruth::in_actor_patch(std::size_t frame, std::size_t token, std::size_t grid_side,
                                    std::size_t patch_side) const {
  const std::size_t r = token / grid_side, c = token % grid_side;
  return r >= actor_row[frame] && r < actor_row[frame] + patch_side && c >= actor_col[frame] &&
         c < actor_col[frame] + patch_side;
}

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t T = spec.frames, G = spec.grid_side, S = G * G, D = spec.channels;
  const std::size_t L = spec.num_layers, P = spec.actor_patch_side;

  SyntheticDataset out;
  out.spec = spec;
  {
    Rng rng(mix_seed(spec.seed, kWorldStream));
    out.world.phase_signatures = normal_vector(rng, spec.num_phases * D);
    out.world.layer_maps = normal_vector(rng, L * D * D, 1.0 / std::sqrt(double(D)));
  }

  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    Rng rng(mix_seed(spec.seed, kVideoStream + v));
    Rng noise_rng(mix_seed(spec.seed, kNoiseStream + v));
    SyntheticTruth truth;
    truth.background = normal_vector(rng, D);
    auto labels = draw_phase_labels(rng, T, spec.num_phases);

    std::uniform_int_distribution<std::size_t> corner(0, G - P);
    const double r0 = double(corner(rng)), c0 = double(corner(rng));
    const double r1 = double(corner(rng)), c1 = double(corner(rng));
    for (std::size_t t = 0; t < T; ++t) {
      const double a = T > 1 ? double(t) / double(T - 1) : 0.0;
      truth.actor_row.push_back(static_cast<std::size_t>(std::lround(r0 + (r1 - r0) * a)));
      truth.actor_col.push_back(static_cast<std::size_t>(std::lround(c0 + (c1 - c0) * a)));
    }

    truth.base_grid.resize(T * S * D);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      const float* sig = out.world.phase_signatures.data() + labels[t] * D;
      for (std::size_t s = 0; s < S; ++s) {
        float* tok = truth.base_grid.data() + (t * S + s) * D;
        const bool actor = truth.in_actor_patch(t, s, G, P);
        for (std::size_t c = 0; c < D; ++c) {
          tok[c] = truth.background[c] + (actor ? sig[c] : 0.0f);
        }
        if (spec.noise_sigma > 0.0) {
          for (std::size_t c = 0; c < D; ++c) {
            tok[c] += static_cast<float>(spec.noise_sigma * noise(noise_rng));
          }
        }
      }
    }

    VideoFeatures video;
    video.video_id = "vid" + std::string(4 - std::min<std::size_t>(4, std::to_string(v).size()), '0') +
                     std::to_string(v);
    video.num_frames = T;
    video.num_layers = L;
    video.num_tokens = S;
    video.channels = D;
    video.data.assign(T * L * S * D, 0.0f);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t l = 0; l < L; ++l) {
        const float* map = out.world.layer_maps.data() + l * D * D;
        float* dst = video.data.data() + (t * L + l) * S * D;
        for (std::size_t s = 0; s < S; ++s) {
          const float* src = truth.base_grid.data() + (t * S + s) * D;
          for (std::size_t i = 0; i < D; ++i) {
            const float x = src[i];
            for (std::size_t j = 0; j < D; ++j) dst[s * D + j] += x * map[i * D + j];
          }
        }
      }
    }
    for (std::size_t t = 0; t < T; ++t) video.timestamps.push_back(std::int64_t(t));
    video.annotations = PhaseAnnotations{labels, progression_from_labels(labels)};
    out.videos.push_back(std::move(video));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

}  // namespace mvf

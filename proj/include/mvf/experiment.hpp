#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mvf/config.hpp"

namespace mvf {

/// Seeded video-level split: the first floor(n * train_fraction) videos of
/// a shuffled order train, the rest test. true marks a test video.
std::vector<bool> split_videos(std::size_t count, double train_fraction, std::uint64_t seed);

/// manifest.tsv: one `id\tsplit` line per video, split being train or test.
void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids,
                    const std::vector<bool>& is_test);
std::vector<std::pair<std::string, bool>> read_manifest(const std::filesystem::path& path);

struct VideoCorpus {
  std::vector<VideoFeatures> videos;
  std::vector<bool> is_test;
};

/// The synthetic dataset of `config.data`, split per the config.
VideoCorpus synthetic_corpus(const RunConfig& config);
/// MVFF files listed in `dir/manifest.tsv`.
VideoCorpus load_corpus(const std::filesystem::path& dir);
/// Applies the layer selection of `config` to every video.
VideoCorpus select_corpus_layers(const VideoCorpus& corpus, const RunConfig& config);

std::vector<VideoFeatures> split_of(const VideoCorpus& corpus, bool test);

EmbeddedDataset embed_corpus(const MvFormer& model, const VideoCorpus& corpus);

struct ExperimentResult {
  TrainResult trained;
  MetricsReport metrics;
};

/// Train on the corpus' train split, then evaluate frozen embeddings.
/// The corpus must already carry the selected layers.
ExperimentResult run_experiment(const RunConfig& config, const VideoCorpus& corpus,
                                const StepCallback& on_step = {});

std::map<std::string, double> metric_map(const MetricsReport& report);
/// JSON object with mean, stdev, interval and per-trial values per metric.
std::string trial_report_json(const TrialReport& report);
/// Plain-text table: metric, mean ± 2σ, then the per-seed values.
std::string trial_report_table(const TrialReport& report);

/// Mean attention mass inside the actor patch for each entity, averaged
/// over frames and model layers. `video` should be rendered without noise.
std::vector<double> actor_attention_mass(const MvFormer& model, const VideoFeatures& video,
                                         const SyntheticTruth& truth, std::size_t grid_side,
                                         std::size_t patch_side);

}  // namespace mvf

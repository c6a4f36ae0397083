#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvf/mtf.hpp"

namespace mvf {

struct EmbeddedVideo {
  std::string video_id;
  FrameEmbeddingSequence embeddings;
  std::vector<std::uint32_t> labels;
  std::vector<float> progression;
};

struct EmbeddedDataset {
  std::vector<EmbeddedVideo> train;
  std::vector<EmbeddedVideo> test;

  /// Both splits nonempty, annotations sized like the embeddings, one
  /// embedding width throughout. Throws std::invalid_argument.
  void validate() const;
};

struct ProbeConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.5;
  double ridge_lambda = 1e-4;
  std::size_t retrieval_k = 5;
};

/// Multinomial logistic regression on standardized embeddings, zero
/// initialized, full-batch gradient descent; returns test frame accuracy.
/// Throws std::invalid_argument if the training split has one class.
double linear_probe_classification(std::span<const EmbeddedVideo> train,
                                   std::span<const EmbeddedVideo> test, std::size_t epochs,
                                   double learning_rate);

/// 1 - SS_res / SS_tot. Requires SS_tot > 0.
double r2_score(std::span<const double> targets, std::span<const double> predictions);

struct R2Result {
  double mean = 0;
  std::vector<std::string> excluded;  // test videos with constant targets
};

/// Closed-form ridge regression (bias unpenalized) from embeddings to
/// progression; R^2 per test video, averaged over the included videos.
R2Result phase_progression_r2(std::span<const EmbeddedVideo> train,
                              std::span<const EmbeddedVideo> test, double lambda);

/// Index in `b` of the Euclidean nearest neighbour of every row of `a`;
/// ties go to the lower index.
std::vector<std::size_t> nearest_neighbors(const FrameEmbeddingSequence& a,
                                           const FrameEmbeddingSequence& b);
/// (concordant - discordant) / (n(n-1)/2) over index pairs of an assignment;
/// equal assignments count as neither. O(n log n).
double kendalls_tau(std::span<const std::size_t> assignment);
/// Tau of the nearest-neighbour assignment from `a` into `b`.
double kendalls_tau(const FrameEmbeddingSequence& a, const FrameEmbeddingSequence& b);
/// Mean tau over all ordered pairs of distinct videos.
double dataset_kendalls_tau(std::span<const EmbeddedVideo> videos);

/// AP@k for one ranked relevance list: sum_{i<=k} P@i rel_i / min(k, R).
double average_precision_at_k(std::span<const std::uint8_t> ranked_relevance,
                              std::size_t total_relevant, std::size_t k);

struct RetrievalResult {
  double mean = 0;
  std::size_t queries = 0;
  std::size_t skipped = 0;  // queries with no relevant candidate
};

/// Every frame queries all frames of the other videos, ranked by Euclidean
/// distance with ties broken by candidate order; relevance is a shared label.
RetrievalResult retrieval_ap_at_k(std::span<const EmbeddedVideo> videos, std::size_t k);

struct MetricsReport {
  double classification = 0;
  double progression = 0;
  double tau = 0;
  double retrieval_ap5 = 0;
  std::vector<std::string> warnings;

  /// {"classification": x, "progression": x, "tau": x, "retrieval_ap5": x}
  std::string to_json() const;
};

MetricsReport evaluate(const EmbeddedDataset& dataset, const ProbeConfig& config);

}  // namespace mvf

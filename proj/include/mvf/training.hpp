#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvf/features.hpp"
#include "mvf/model.hpp"

namespace mvf {

struct TrainConfig {
  std::size_t view_length = 16;
  double sigma = 3.0;
  double temperature = 0.1;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t steps = 300;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  /// Backbone layers fed to the model (0-based); empty keeps all of them.
  std::vector<std::size_t> layer_ids;
  ModelConfig model;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct View {
  std::vector<std::size_t> frames;
  std::vector<std::int64_t> timestamps;
};

/// Two independent views of `view_length` sorted frames each, drawn
/// uniformly without replacement. Throws std::invalid_argument if the video
/// is shorter than `view_length`.
std::pair<View, View> sample_two_views(const VideoFeatures& video, std::size_t view_length,
                                       std::uint64_t seed);

/// Row-normalized Gaussian affinity exp(-(a_i - b_j)^2 / (2 sigma^2)).
std::vector<double> gaussian_targets(std::span<const std::int64_t> a,
                                     std::span<const std::int64_t> b, double sigma);
/// KL(g || p) for one pair of distributions; 0 log 0 is taken as 0.
double kl_divergence(std::span<const double> g, std::span<const double> p);

/// Sequence contrastive loss between two views of one video: mean KL from
/// Gaussian timestamp targets to softmax(cos / temperature), averaged over
/// both directions. Throws ContractError on a zero-norm embedding row.
template <typename Real>
Var<Real> scl_loss(Var<Real> z1, std::span<const std::int64_t> t1, Var<Real> z2,
                   std::span<const std::int64_t> t2, double sigma, double temperature);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::uint64_t step = 0;

  static AdamState for_params(const ParameterSet& params);
};

/// One bias-corrected Adam update from the grads held in `params`.
/// Throws DimensionError if the state does not match the parameters.
void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& config);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  MvFormer model;
  std::vector<float> losses;  // one per step
};

using StepCallback = std::function<void(std::size_t step, float loss)>;

/// Sample -> model -> projection -> SCL -> Adam for `config.steps` steps.
/// `videos` must already carry the selected layers. Throws TrainingError
/// naming the step on a non-finite loss.
TrainResult train(std::span<const VideoFeatures> videos, const TrainConfig& config,
                  const StepCallback& on_step = {});

/// Formats a loss trace line: "step\tloss\n" with 6 significant digits.
std::string format_loss_line(std::size_t step, float loss);

struct MetricSummary {
  std::vector<double> values;
  double mean = 0;
  double stdev = 0;  // sample (n-1)
  std::string interval() const;  // "mean ± 2·stdev" with two decimals
};

struct TrialReport {
  std::vector<std::uint64_t> seeds;
  std::map<std::string, MetricSummary> metrics;
};

MetricSummary summarize(std::vector<double> values);

using TrialFn = std::function<std::map<std::string, double>(std::uint64_t seed)>;

/// Runs `trial` once per seed and aggregates every metric it reports.
/// Requires at least two seeds; per-trial failures are rethrown as
/// TrainingError carrying the seed.
TrialReport run_trials(std::span<const std::uint64_t> seeds, const TrialFn& trial);

}  // namespace mvf

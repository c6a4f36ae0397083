#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "mvf/eval.hpp"
#include "mvf/features.hpp"
#include "mvf/training.hpp"

namespace mvf {

/// Every tunable of a run: data generation, model, training and probes.
struct RunConfig {
  SyntheticSpec data;
  double train_fraction = 0.8;
  TrainConfig train;
  ProbeConfig probe;

  /// Derives model.channels and model.layers from the data and layer
  /// selection, then validates everything. Throws ConfigError.
  void resolve();
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys, repeated
/// keys and unparsable values raise ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Resolved configuration as config text; parsing it reproduces `config`.
std::string config_text(const RunConfig& config);

}  // namespace mvf

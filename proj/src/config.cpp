#include "mvf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mvf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + text +
                      "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  if (text == "all") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_u64(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty layer list");
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(T RunConfig::*group, std::size_t T::*member, const char* key) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_u64(key, v); },
          [=](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

template <typename T>
Field double_field(T RunConfig::*group, double T::*member, const char* key) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_double(key, v); },
          [=](const RunConfig& c) { return format_double((c.*group).*member); }};
}

// Ordered key table; the echo follows this order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const auto table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto model_size = [&](const char* key, std::size_t ModelConfig::*m) {
      t.emplace_back(key, Field{[=](RunConfig& c, const std::string& v) {
                                  c.train.model.*m = parse_u64(key, v);
                                },
                                [=](const RunConfig& c) {
                                  return std::to_string(c.train.model.*m);
                                }});
    };
    // data
    t.emplace_back("num_videos", size_field(&RunConfig::data, &SyntheticSpec::num_videos, "num_videos"));
    t.emplace_back("frames", size_field(&RunConfig::data, &SyntheticSpec::frames, "frames"));
    t.emplace_back("grid_side", size_field(&RunConfig::data, &SyntheticSpec::grid_side, "grid_side"));
    t.emplace_back("channels", size_field(&RunConfig::data, &SyntheticSpec::channels, "channels"));
    t.emplace_back("num_phases", size_field(&RunConfig::data, &SyntheticSpec::num_phases, "num_phases"));
    t.emplace_back("actor_patch_side",
                   size_field(&RunConfig::data, &SyntheticSpec::actor_patch_side, "actor_patch_side"));
    t.emplace_back("backbone_layers",
                   size_field(&RunConfig::data, &SyntheticSpec::num_layers, "backbone_layers"));
    t.emplace_back("noise_sigma",
                   double_field(&RunConfig::data, &SyntheticSpec::noise_sigma, "noise_sigma"));
    t.emplace_back("data_seed", Field{[](RunConfig& c, const std::string& v) {
                                        c.data.seed = parse_u64("data_seed", v);
                                      },
                                      [](const RunConfig& c) { return std::to_string(c.data.seed); }});
    t.emplace_back("train_fraction", Field{[](RunConfig& c, const std::string& v) {
                                             c.train_fraction = parse_double("train_fraction", v);
                                           },
                                           [](const RunConfig& c) {
                                             return format_double(c.train_fraction);
                                           }});
    // model
    t.emplace_back("architecture", Field{[](RunConfig& c, const std::string& v) {
                                           try {
                                             c.train.model.architecture = parse_architecture(v);
                                           } catch (const std::invalid_argument& e) {
                                             throw ConfigError("config key 'architecture': " +
                                                               std::string(e.what()));
                                           }
                                         },
                                         [](const RunConfig& c) {
                                           return to_string(c.train.model.architecture);
                                         }});
    model_size("entities", &ModelConfig::entities);
    t.emplace_back("layers", Field{[](RunConfig& c, const std::string& v) {
                                     c.train.layer_ids = parse_list("layers", v);
                                   },
                                   [](const RunConfig& c) {
                                     if (c.train.layer_ids.empty()) return std::string("all");
                                     std::string s;
                                     for (auto id : c.train.layer_ids)
                                       s += (s.empty() ? "" : ",") + std::to_string(id);
                                     return s;
                                   }});
    model_size("query_dim", &ModelConfig::query_dim);
    model_size("value_dim", &ModelConfig::value_dim);
    model_size("model_dim", &ModelConfig::model_dim);
    model_size("fusion_dim", &ModelConfig::fusion_dim);
    model_size("blocks", &ModelConfig::blocks);
    model_size("heads", &ModelConfig::heads);
    model_size("mlp_ratio", &ModelConfig::mlp_ratio);
    t.emplace_back("pooling", Field{[](RunConfig& c, const std::string& v) {
                                      try {
                                        c.train.model.pooling = parse_pooling(v);
                                      } catch (const std::invalid_argument& e) {
                                        throw ConfigError("config key 'pooling': " +
                                                          std::string(e.what()));
                                      }
                                    },
                                    [](const RunConfig& c) {
                                      return to_string(c.train.model.pooling);
                                    }});
    model_size("projection_dim", &ModelConfig::projection_dim);
    // training
    t.emplace_back("view_length", size_field(&RunConfig::train, &TrainConfig::view_length, "view_length"));
    t.emplace_back("sigma", double_field(&RunConfig::train, &TrainConfig::sigma, "sigma"));
    t.emplace_back("temperature",
                   double_field(&RunConfig::train, &TrainConfig::temperature, "temperature"));
    t.emplace_back("learning_rate",
                   double_field(&RunConfig::train, &TrainConfig::learning_rate, "learning_rate"));
    t.emplace_back("beta1", double_field(&RunConfig::train, &TrainConfig::beta1, "beta1"));
    t.emplace_back("beta2", double_field(&RunConfig::train, &TrainConfig::beta2, "beta2"));
    t.emplace_back("adam_eps", double_field(&RunConfig::train, &TrainConfig::adam_eps, "adam_eps"));
    t.emplace_back("steps", size_field(&RunConfig::train, &TrainConfig::steps, "steps"));
    t.emplace_back("batch_size", size_field(&RunConfig::train, &TrainConfig::batch_size, "batch_size"));
    t.emplace_back("seed", Field{[](RunConfig& c, const std::string& v) {
                                   c.train.seed = parse_u64("seed", v);
                                 },
                                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    // probes
    t.emplace_back("probe_epochs", size_field(&RunConfig::probe, &ProbeConfig::epochs, "probe_epochs"));
    t.emplace_back("probe_learning_rate",
                   double_field(&RunConfig::probe, &ProbeConfig::learning_rate, "probe_learning_rate"));
    t.emplace_back("ridge_lambda",
                   double_field(&RunConfig::probe, &ProbeConfig::ridge_lambda, "ridge_lambda"));
    t.emplace_back("retrieval_k",
                   size_field(&RunConfig::probe, &ProbeConfig::retrieval_k, "retrieval_k"));
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::resolve() {
  auto& m = train.model;
  m.channels = data.channels;
  m.layers = train.layer_ids.empty() ? data.num_layers : train.layer_ids.size();
  try {
    data.validate();
    for (auto id : train.layer_ids) {
      if (id >= data.num_layers) {
        throw std::invalid_argument("layer " + std::to_string(id) + " is outside the " +
                                    std::to_string(data.num_layers) + " backbone layers");
      }
    }
    if (!(train_fraction > 0 && train_fraction < 1)) {
      throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
    }
    if (train.view_length > data.frames) {
      throw std::invalid_argument("view_length exceeds the frame count");
    }
    if (m.query_dim == 0 || m.value_dim == 0 || m.projection_dim == 0) {
      throw std::invalid_argument("model dimensions must be positive");
    }
    if (probe.retrieval_k == 0) throw std::invalid_argument("retrieval_k must be positive");
    if (!(probe.learning_rate > 0) || !(probe.ridge_lambda >= 0)) {
      throw std::invalid_argument("probe rates must be positive");
    }
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) {
      throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(number));
    }
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' set twice");
    if (value.empty()) throw ConfigError("config key '" + key + "' has no value");
    it->second.set(config, value);
  }
  config.resolve();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace mvf

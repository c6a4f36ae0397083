// mvformer: dataset generation, training, evaluation, attention export and
// multi-seed trials driven by a flat `key = value` config file.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mvf/experiment.hpp"

namespace fs = std::filesystem;
using namespace mvf;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2 };

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string video;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
};

RunConfig resolved_config(const Options& opt, bool seed_is_data_seed) {
  RunConfig cfg = opt.config.empty() ? RunConfig{} : load_config(opt.config);
  if (opt.seed) (seed_is_data_seed ? cfg.data.seed : cfg.train.seed) = *opt.seed;
  cfg.resolve();
  // The echo is itself a valid config file.
  std::cerr << "# resolved configuration\n" << config_text(cfg);
  return cfg;
}

void warn(const std::string& message) { std::cerr << "# warning: " << message << '\n'; }

VideoCorpus corpus_for(const RunConfig& cfg, const Options& opt) {
  VideoCorpus corpus = opt.data.empty() ? synthetic_corpus(cfg) : load_corpus(opt.data);
  for (const auto& v : corpus.videos) {
    if (v.channels != cfg.data.channels || v.num_layers != cfg.data.num_layers) {
      throw std::runtime_error("video " + v.video_id + " has " + std::to_string(v.num_layers) +
                               " layers of " + std::to_string(v.channels) +
                               " channels; config says backbone_layers = " +
                               std::to_string(cfg.data.num_layers) +
                               ", channels = " + std::to_string(cfg.data.channels));
    }
  }
  return select_corpus_layers(corpus, cfg);
}

MvFormer load_model(const RunConfig& cfg, const std::string& path) {
  return MvFormer(cfg.train.model, load_checkpoint(path));
}

int cmd_gen(const Options& opt) {
  const auto cfg = resolved_config(opt, true);
  const fs::path dir = opt.out;
  fs::create_directories(dir);
  const auto ds = generate_synthetic_dataset(cfg.data);
  const auto is_test = split_videos(ds.videos.size(), cfg.train_fraction, cfg.data.seed);
  std::vector<std::string> ids;
  for (const auto& v : ds.videos) {
    write_mvff(v, dir / (v.video_id + ".mvff"));
    ids.push_back(v.video_id);
  }
  write_manifest(dir / "manifest.tsv", ids, is_test);
  const auto tests = std::count(is_test.begin(), is_test.end(), true);
  std::cout << "wrote " << ids.size() << " videos (" << ids.size() - std::size_t(tests)
            << " train, " << tests << " test) to " << dir.string() << '\n';
  return kOk;
}

int cmd_train(const Options& opt) {
  const auto cfg = resolved_config(opt, false);
  const auto corpus = corpus_for(cfg, opt);
  const auto videos = split_of(corpus, false);
  auto result = train(videos, cfg.train,
                      [](std::size_t step, float loss) { std::cout << format_loss_line(step, loss); });
  save_checkpoint(result.model.params(), opt.out);
  return kOk;
}

int cmd_eval(const Options& opt) {
  const auto cfg = resolved_config(opt, false);
  const auto model = load_model(cfg, opt.checkpoint);
  const auto corpus = corpus_for(cfg, opt);
  const auto report = evaluate(embed_corpus(model, corpus), cfg.probe);
  for (const auto& w : report.warnings) warn(w);
  std::cout << report.to_json() << '\n';
  return kOk;
}

int cmd_attn(const Options& opt) {
  const auto cfg = resolved_config(opt, false);
  const auto model = load_model(cfg, opt.checkpoint);
  if (!model.lstp()) throw std::runtime_error("the fixed-width baseline has no attention maps");
  const auto corpus = corpus_for(cfg, opt);
  auto it = std::find_if(corpus.videos.begin(), corpus.videos.end(),
                         [&](const VideoFeatures& v) { return v.video_id == opt.video; });
  if (it == corpus.videos.end()) throw std::runtime_error("no video named '" + opt.video + "'");
  const fs::path dir = opt.out;
  fs::create_directories(dir);
  Tape<float> tape;
  const auto ents = model.entities(tape, *it);
  std::size_t written = 0;
  for (std::size_t t = 0; t < ents.frames; ++t)
    for (std::size_t e = 0; e < ents.entities; ++e)
      for (std::size_t l = 0; l < ents.layers; ++l) {
        export_attention(attention_map(ents, t, l, e),
                         dir / attention_file_name(it->video_id, t, e, l));
        ++written;
      }
  std::cout << "wrote " << written << " attention maps to " << dir.string() << '\n';
  return kOk;
}

int cmd_trials(const Options& opt) {
  const auto cfg = resolved_config(opt, false);
  const auto corpus = corpus_for(cfg, opt);
  const auto report = run_trials(opt.seeds, [&](std::uint64_t seed) {
    auto trial = cfg;
    trial.train.seed = seed;
    auto result = run_experiment(trial, corpus);
    for (const auto& w : result.metrics.warnings) warn("seed " + std::to_string(seed) + ": " + w);
    return metric_map(result.metrics);
  });
  std::cout << trial_report_table(report);
  if (!opt.out.empty()) {
    std::ofstream out(opt.out, std::ios::binary);
    out << trial_report_json(report) << '\n';
    if (!out) throw std::runtime_error("cannot write " + opt.out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-entity video representation learning on frozen backbone features"};
  app.require_subcommand(1);
  Options opt;

  auto* gen = app.add_subcommand("gen", "write a synthetic MVFF dataset and manifest");
  gen->add_option("--config", opt.config, "config file")->check(CLI::ExistingFile);
  gen->add_option("--out", opt.out, "output directory")->required();
  gen->add_option("--seed", opt.seed, "overrides data_seed");

  auto* tr = app.add_subcommand("train", "train on the train split; loss trace on stdout");
  tr->add_option("--config", opt.config, "config file")->check(CLI::ExistingFile);
  tr->add_option("--data", opt.data, "dataset directory (default: synthetic from config)");
  tr->add_option("--out", opt.out, "checkpoint path")->required();
  tr->add_option("--seed", opt.seed, "overrides seed");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint; JSON metrics on stdout");
  ev->add_option("--config", opt.config, "config file")->check(CLI::ExistingFile);
  ev->add_option("--data", opt.data, "dataset directory (default: synthetic from config)");
  ev->add_option("--checkpoint", opt.checkpoint, "checkpoint path")->required();
  ev->add_option("--seed", opt.seed, "overrides seed");

  auto* at = app.add_subcommand("attn", "export LSTP attention maps of one video as PGM");
  at->add_option("--config", opt.config, "config file")->check(CLI::ExistingFile);
  at->add_option("--data", opt.data, "dataset directory (default: synthetic from config)");
  at->add_option("--checkpoint", opt.checkpoint, "checkpoint path")->required();
  at->add_option("--video", opt.video, "video id")->required();
  at->add_option("--out", opt.out, "output directory")->required();

  auto* tri = app.add_subcommand("trials", "train and evaluate once per seed");
  tri->add_option("--config", opt.config, "config file")->check(CLI::ExistingFile);
  tri->add_option("--data", opt.data, "dataset directory (default: synthetic from config)");
  tri->add_option("--seeds", opt.seeds, "comma-separated seeds")->delimiter(',')->required();
  tri->add_option("--out", opt.out, "also write the report as JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(opt);
    if (*tr) return cmd_train(opt);
    if (*ev) return cmd_eval(opt);
    if (*at) return cmd_attn(opt);
    if (*tri) return cmd_trials(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

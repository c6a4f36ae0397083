#include "mvf/experiment.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mvf/random.hpp"

namespace mvf {

std::vector<bool> split_videos(std::size_t count, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x6000));
  std::shuffle(order.begin(), order.end(), rng);
  const auto train = static_cast<std::size_t>(std::floor(double(count) * train_fraction));
  std::vector<bool> is_test(count, false);
  for (std::size_t i = train; i < count; ++i) is_test[order[i]] = true;
  return is_test;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids,
                    const std::vector<bool>& is_test) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << '\t' << (is_test[i] ? "test" : "train") << '\n';
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

std::vector<std::pair<std::string, bool>> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  std::vector<std::pair<std::string, bool>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string split = tab == std::string::npos ? "" : line.substr(tab + 1);
    if (split != "train" && split != "test") {
      throw std::runtime_error("manifest line " + std::to_string(number) +
                               ": expected 'id<TAB>train|test'");
    }
    out.emplace_back(line.substr(0, tab), split == "test");
  }
  return out;
}

VideoCorpus synthetic_corpus(const RunConfig& config) {
  auto ds = generate_synthetic_dataset(config.data);
  VideoCorpus corpus;
  corpus.is_test = split_videos(ds.videos.size(), config.train_fraction, config.data.seed);
  corpus.videos = std::move(ds.videos);
  return corpus;
}

VideoCorpus load_corpus(const std::filesystem::path& dir) {
  VideoCorpus corpus;
  for (const auto& [id, test] : read_manifest(dir / "manifest.tsv")) {
    corpus.videos.push_back(load_mvff(dir / (id + ".mvff")));
    corpus.is_test.push_back(test);
  }
  if (corpus.videos.empty()) throw std::runtime_error("manifest in " + dir.string() + " is empty");
  return corpus;
}

VideoCorpus select_corpus_layers(const VideoCorpus& corpus, const RunConfig& config) {
  VideoCorpus out;
  out.is_test = corpus.is_test;
  for (const auto& v : corpus.videos) {
    if (config.train.layer_ids.empty()) {
      out.videos.push_back(v);
    } else {
      out.videos.push_back(select_layers(v, config.train.layer_ids));
    }
  }
  return out;
}

std::vector<VideoFeatures> split_of(const VideoCorpus& corpus, bool test) {
  std::vector<VideoFeatures> out;
  for (std::size_t i = 0; i < corpus.videos.size(); ++i)
    if (corpus.is_test[i] == test) out.push_back(corpus.videos[i]);
  return out;
}

EmbeddedDataset embed_corpus(const MvFormer& model, const VideoCorpus& corpus) {
  EmbeddedDataset ds;
  for (std::size_t i = 0; i < corpus.videos.size(); ++i) {
    const auto& v = corpus.videos[i];
    if (!v.annotations) {
      throw std::invalid_argument("video " + v.video_id + " has no phase annotations");
    }
    EmbeddedVideo e{v.video_id, model.embed(v), v.annotations->labels, v.annotations->progression};
    (corpus.is_test[i] ? ds.test : ds.train).push_back(std::move(e));
  }
  return ds;
}

ExperimentResult run_experiment(const RunConfig& config, const VideoCorpus& corpus,
                                const StepCallback& on_step) {
  const auto train_videos = split_of(corpus, false);
  auto trained = train(train_videos, config.train, on_step);
  auto metrics = evaluate(embed_corpus(trained.model, corpus), config.probe);
  return {std::move(trained), std::move(metrics)};
}

std::map<std::string, double> metric_map(const MetricsReport& report) {
  return {{"classification", report.classification},
          {"progression", report.progression},
          {"tau", report.tau},
          {"retrieval_ap5", report.retrieval_ap5}};
}

std::string trial_report_json(const TrialReport& report) {
  nlohmann::ordered_json j;
  j["seeds"] = report.seeds;
  for (const auto& [name, s] : report.metrics) {
    j[name] = {{"mean", s.mean}, {"stdev", s.stdev}, {"interval", s.interval()},
               {"trials", s.values}};
  }
  return j.dump(2);
}

std::string trial_report_table(const TrialReport& report) {
  std::ostringstream out;
  out << "metric\tmean ± 2σ";
  for (auto s : report.seeds) out << "\tseed " << s;
  out << '\n';
  for (const auto& [name, s] : report.metrics) {
    out << name << '\t' << s.interval();
    for (double v : s.values) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "\t%.4f", v);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<double> actor_attention_mass(const MvFormer& model, const VideoFeatures& video,
                                         const SyntheticTruth& truth, std::size_t grid_side,
                                         std::size_t patch_side) {
  if (!model.lstp()) throw std::invalid_argument("the fixed-width baseline has no attention maps");
  Tape<float> tape;
  auto ents = model.entities(tape, video);
  std::vector<double> mass(ents.entities, 0.0);
  for (std::size_t e = 0; e < ents.entities; ++e) {
    for (std::size_t t = 0; t < ents.frames; ++t)
      for (std::size_t l = 0; l < ents.layers; ++l) {
        auto row = ents.attention_row(t, l, e);
        for (std::size_t s = 0; s < row.size(); ++s)
          if (truth.in_actor_patch(t, s, grid_side, patch_side)) mass[e] += row[s];
      }
    mass[e] /= double(ents.frames * ents.layers);
  }
  return mass;
}

}  // namespace mvf

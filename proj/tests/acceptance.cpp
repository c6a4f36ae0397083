// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N[,N...]] [--known-failures N[,N...]] [--config PATH]
//
// The end-to-end criteria (7-9) train nine models twice and take several
// minutes. Exit status is 0 when the failing criteria are exactly the
// --known-failures list, so a regression or an unexpected pass both show up.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "mvf/experiment.hpp"
#include "mvf/grad_check.hpp"
#include "mvf/random.hpp"

using namespace mvf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

VideoFeatures random_video(std::size_t T, std::size_t L, std::size_t S, std::size_t D, Rng& rng) {
  VideoFeatures v;
  v.video_id = "toy";
  v.num_frames = T;
  v.num_layers = L;
  v.num_tokens = S;
  v.channels = D;
  v.data = normal_vector(rng, T * L * S * D);
  for (std::size_t t = 0; t < T; ++t) v.timestamps.push_back(std::int64_t(t));
  return v;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  ModelConfig cfg;
  cfg.entities = 2;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.query_dim = cfg.value_dim = 4;
  cfg.model_dim = 6;
  cfg.fusion_dim = 8;
  cfg.heads = 2;
  cfg.mlp_ratio = 2;
  cfg.projection_dim = 4;
  MvFormer model(cfg, 7);
  Rng rng(8);
  auto video = random_video(2, 2, 4, 8, rng);
  std::vector<std::size_t> v1{0, 1}, v2{0, 1};
  std::vector<std::int64_t> t1{0, 1}, t2{0, 1};
  auto report = grad_check(model.params(), [&](Binder<double>& bind) {
    auto a = model.forward(bind, video, v1);
    auto b = model.forward(bind, video, v2);
    return scl_loss(a.projection, t1, b.projection, t2, 3.0, 0.1);
  });
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = report.passed() && report.max_relative_error < 1e-5 && secs < 10 &&
           report.checked == model.params().scalar_count();
  o.detail = "max relative error " + fmt("%.2e", report.max_relative_error) + " over " +
             std::to_string(report.checked) + " parameters (worst " + report.worst_parameter +
             "), " + fmt("%.1f", secs) + " s";
  return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome attention_invariants() {
  Outcome o;
  const LstpConfig cfg{3, 2, 8, 8, 6, 10};
  double worst_row = 0, worst_collapse = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    ParameterSet ps;
    Lstp lstp(cfg, ps, rng);
    auto video = random_video(4, 2, 16, 8, rng);
    // Frame 3: every token of each layer equals that layer's first token.
    for (std::size_t l = 0; l < 2; ++l) {
      float* grid = video.data.data() + (3 * 2 + l) * 16 * 8;
      for (std::size_t s = 1; s < 16; ++s) std::copy_n(grid, 8, grid + s * 8);
    }
    std::vector<std::size_t> frames{0, 1, 2, 3};
    Tape<float> tape;
    Binder<float> bind(tape, ps);
    auto ents = lstp.forward(bind, video, frames);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t e = 0; e < 3; ++e) {
          auto row = ents.attention_row(t, l, e);
          const double sum = std::accumulate(row.begin(), row.end(), 0.0);
          worst_row = std::max(worst_row, std::abs(sum - 1.0));
        }
    // Oracle: W_O applied to the concatenated per-layer value projections.
    const auto& wo = ps[lstp.out_weight_param()].value.data;
    const auto& bo = ps[lstp.out_weight_param() + 1].value.data;
    std::vector<double> cat;
    for (std::size_t l = 0; l < 2; ++l) {
      const float* tok = video.data.data() + (3 * 2 + l) * 16 * 8;
      const auto& wv = ps[lstp.value_param(l)].value.data;
      for (std::size_t j = 0; j < 6; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < 8; ++c) s += double(tok[c]) * wv[c * 6 + j];
        cat.push_back(s);
      }
    }
    for (std::size_t e = 0; e < 3; ++e)
      for (std::size_t j = 0; j < 10; ++j) {
        double want = bo[j];
        for (std::size_t i = 0; i < 12; ++i) want += cat[i] * wo[i * 10 + j];
        worst_collapse =
            std::max(worst_collapse, std::abs(ents.features.value()[(3 * 3 + e) * 10 + j] - want));
      }
  }
  o.pass = worst_row <= 1e-5 && worst_collapse <= 1e-5;
  o.detail = "max |row sum - 1| " + fmt("%.1e", worst_row) + ", max collapse deviation " +
             fmt("%.1e", worst_collapse);
  return o;
}

// ---- 3 ---------------------------------------------------------------------

Outcome mtf_permutations() {
  const std::size_t T = 6, E = 3;
  std::size_t cls_checked = 0, cls_exact = 0;
  double avg_worst = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(300 + trial);
    for (auto mode : {Pooling::cls_style, Pooling::average}) {
      MtfConfig cfg;
      cfg.entities = E;
      cfg.model_dim = 16;
      cfg.fusion_dim = 16;
      cfg.heads = 4;
      cfg.mlp_ratio = 2;
      cfg.pooling = mode;
      ParameterSet ps;
      FusionTransformer fusion(cfg, ps, rng);
      Tape<float> tape;
      Binder<float> bind(tape, ps);
      auto feats = tape.constant({T * E, 16}, normal_vector(rng, T * E * 16));
      auto tokens = build_frame_tokens(feats, sequence_positions(T), cfg);
      auto base = pool_output(fusion.forward(bind, tokens), E, mode);
      std::vector<float> ref(base.value().begin(), base.value().end());
      std::vector<std::size_t> perm{0, 1, 2};
      do {
        if (mode == Pooling::cls_style && perm[0] != 0) continue;
        std::vector<std::size_t> rows;
        for (std::size_t t = 0; t < T; ++t)
          for (auto e : perm) rows.push_back(t * E + e);
        auto out = pool_output(fusion.forward(bind, take_rows(tokens, rows)), E, mode);
        auto v = out.value();
        if (mode == Pooling::cls_style) {
          ++cls_checked;
          cls_exact += std::memcmp(v.data(), ref.data(), ref.size() * sizeof(float)) == 0;
        } else {
          for (std::size_t i = 0; i < ref.size(); ++i)
            avg_worst = std::max(avg_worst, double(std::abs(v[i] - ref[i])));
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  Outcome o;
  o.pass = cls_exact == cls_checked && avg_worst <= 1e-6;
  o.detail = "cls_style bit-identical " + std::to_string(cls_exact) + "/" +
             std::to_string(cls_checked) + ", average max deviation " + fmt("%.1e", avg_worst);
  return o;
}

// ---- 4 ---------------------------------------------------------------------

Outcome parameter_accounting() {
  ModelConfig mv;
  mv.entities = 3;
  auto fw = mv;
  fw.architecture = Architecture::fixed_width;
  MvFormer a(mv, 1), b(fw, 1);
  const std::size_t na = a.params().scalar_count("mtf."), nb = b.params().scalar_count("mtf.");
  bool pass = na == nb;
  // Counting by hand: input projection plus blocks plus final norm, with
  // only the first projection seeing the E ID coordinates.
  const std::size_t F = mv.fusion_dim, H = mv.mlp_ratio * F;
  const std::size_t block = 2 * F + (F * 3 * F + 3 * F) + (F * F + F) + 2 * F + (F * H + H) +
                            (H * F + F);
  for (std::size_t E = 1; E <= 6; ++E) {
    auto c = mv;
    c.entities = E;
    const std::size_t want = (mv.model_dim + E) * F + F + mv.blocks * block + 2 * F;
    MvFormer m(c, 1);
    pass = pass && m.params().scalar_count("mtf.") == want &&
           FusionTransformer::parameter_count(c.mtf()) == want;
    auto c1 = mv;
    c1.entities = 1;
    pass = pass && FusionTransformer::parameter_count(c.mtf()) -
                           FusionTransformer::parameter_count(c1.mtf()) ==
                       (E - 1) * F;
  }
  Outcome o;
  o.pass = pass;
  o.detail = "fusion parameters MTF(E=3) " + std::to_string(na) + ", FWB(N=3) " +
             std::to_string(nb) + "; count(E) - count(1) = (E-1)*" + std::to_string(F) +
             " for E = 1..6";
  return o;
}

// ---- 5 ---------------------------------------------------------------------

double tau_oracle(const std::vector<std::size_t>& n) {
  long long c = 0, d = 0;
  for (std::size_t i = 0; i < n.size(); ++i)
    for (std::size_t j = i + 1; j < n.size(); ++j) {
      c += n[j] > n[i];
      d += n[j] < n[i];
    }
  return double(c - d) / (double(n.size()) * double(n.size() - 1) / 2);
}

EmbeddedVideo toy_embedded(Rng& rng, std::size_t frames, std::size_t dim, std::uint32_t classes,
                           bool quantize) {
  EmbeddedVideo v;
  v.video_id = "q";
  auto vals = normal_vector(rng, frames * dim);
  if (quantize)
    for (auto& x : vals) x = std::round(x);
  v.embeddings = {frames, dim, vals};
  for (std::size_t t = 0; t < frames; ++t) {
    v.labels.push_back(std::uint32_t(rng() % classes));
    v.progression.push_back(0);
  }
  return v;
}

double ap_oracle(const std::vector<EmbeddedVideo>& videos, std::size_t k) {
  double sum = 0;
  std::size_t scored = 0;
  for (std::size_t q = 0; q < videos.size(); ++q) {
    const auto& qe = videos[q].embeddings;
    for (std::size_t t = 0; t < qe.frames; ++t) {
      std::vector<std::pair<double, bool>> all;
      for (std::size_t v = 0; v < videos.size(); ++v) {
        if (v == q) continue;
        for (std::size_t f = 0; f < videos[v].embeddings.frames; ++f) {
          double d = 0;
          for (std::size_t c = 0; c < qe.dim; ++c) {
            const double x =
                double(qe.values[t * qe.dim + c]) - videos[v].embeddings.values[f * qe.dim + c];
            d += x * x;
          }
          all.emplace_back(d, videos[v].labels[f] == videos[q].labels[t]);
        }
      }
      std::stable_sort(all.begin(), all.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t R = 0;
      for (const auto& a : all) R += a.second;
      if (!R) continue;
      double ap = 0;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < std::min(k, all.size()); ++i)
        if (all[i].second) ap += double(++hits) / double(i + 1);
      sum += ap / double(std::min(k, R));
      ++scored;
    }
  }
  return scored ? sum / double(scored) : 0.0;
}

Outcome metric_oracles() {
  Rng rng(500);
  std::size_t tau_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng() % 49, range = 1 + rng() % 50;
    std::vector<std::size_t> a(n);
    for (auto& x : a) x = rng() % range;
    tau_ok += kendalls_tau(a) == tau_oracle(a);
  }
  std::size_t ap_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t nv = 2 + rng() % 4;
    const std::size_t frames = 1 + rng() % (200 / nv), dim = 1 + rng() % 4;
    const std::uint32_t classes = 1 + rng() % 4;
    std::vector<EmbeddedVideo> videos;
    for (std::size_t v = 0; v < nv; ++v)
      videos.push_back(toy_embedded(rng, frames, dim, classes, i % 2 == 0));
    const std::size_t k = 1 + rng() % 8;
    ap_ok += retrieval_ap_at_k(videos, k).mean == ap_oracle(videos, k);
  }
  std::vector<double> t{0, 1, 2};
  bool r2 = r2_score(t, std::vector<double>{0, 1, 2}) == 1.0 &&
            r2_score(t, std::vector<double>{1, 1, 1}) == 0.0 &&
            r2_score(t, std::vector<double>{0, 1, 1}) == 0.5;

  // Probe: separable clusters at +-e1, then shuffled labels at chance.
  std::vector<EmbeddedVideo> sep(2);
  for (auto& v : sep) {
    for (std::size_t f = 0; f < 40; ++f) {
      const bool pos = f % 2 == 0;
      v.embeddings.values.insert(v.embeddings.values.end(), {pos ? 1.f : -1.f, 0.f});
      v.labels.push_back(pos);
      v.progression.push_back(0);
    }
    v.embeddings.frames = 40;
    v.embeddings.dim = 2;
  }
  const double separable = linear_probe_classification({sep.data(), 1}, {sep.data() + 1, 1}, 200, 0.5);
  double chance = 0;
  for (int s = 0; s < 5; ++s) {
    Rng r(600 + s);
    std::vector<EmbeddedVideo> tr, te;
    for (int i = 0; i < 8; ++i) tr.push_back(toy_embedded(r, 32, 16, 4, false));
    for (int i = 0; i < 2; ++i) te.push_back(toy_embedded(r, 32, 16, 4, false));
    chance += linear_probe_classification(tr, te, 300, 0.5) / 5;
  }
  Outcome o;
  o.pass = tau_ok == 100 && ap_ok == 100 && r2 && separable == 1.0 && std::abs(chance - 0.25) <= 0.15;
  o.detail = "tau exact " + std::to_string(tau_ok) + "/100, AP@k exact " + std::to_string(ap_ok) +
             "/100, R2 cases " + (r2 ? "ok" : "wrong") + ", probe separable " +
             fmt("%.3f", separable) + ", shuffled " + fmt("%.3f", chance);
  return o;
}

// ---- 6 ---------------------------------------------------------------------

double scl(const std::vector<double>& z1, const std::vector<std::int64_t>& t1,
           const std::vector<double>& z2, const std::vector<std::int64_t>& t2, std::size_t d,
           double sigma, double tau) {
  Tape<double> tape;
  auto a = tape.constant({t1.size(), d}, z1);
  auto b = tape.constant({t2.size(), d}, z2);
  return scl_loss(a, t1, b, t2, sigma, tau).value()[0];
}

Outcome scl_properties() {
  Rng rng(700);
  std::uniform_real_distribution<double> u(-1, 1);
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
  };
  double min_loss = INFINITY, worst_scale = 0, worst_shift = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n1 = 2 + rng() % 8, n2 = 2 + rng() % 8, d = 1 + rng() % 8;
    std::vector<std::int64_t> t1(n1), t2(n2);
    for (auto& t : t1) t = std::int64_t(rng() % 32);
    for (auto& t : t2) t = std::int64_t(rng() % 32);
    const double sigma = 0.5 + double(rng() % 60) / 10, tau = 0.05 + double(rng() % 20) / 20;
    auto z1 = draw(n1 * d), z2 = draw(n2 * d);
    const double base = scl(z1, t1, z2, t2, d, sigma, tau);
    min_loss = std::min(min_loss, base);
    auto s2 = z2;
    for (std::size_t r = 0; r < n2; ++r) {
      const double c = 0.01 + double(rng() % 1000) / 100;
      for (std::size_t k = 0; k < d; ++k) s2[r * d + k] *= c;
    }
    worst_scale = std::max(worst_scale, std::abs(scl(z1, t1, s2, t2, d, sigma, tau) - base));
    const std::int64_t shift = std::int64_t(rng() % 1000);
    auto u1 = t1, u2 = t2;
    for (auto& t : u1) t += shift;
    for (auto& t : u2) t += shift;
    worst_shift = std::max(worst_shift, std::abs(scl(z1, u1, z2, u2, d, sigma, tau) - base));
  }
  // Two frames at angles 0 and theta with 1 - cos(theta) = tau delta^2 / (2 sigma^2):
  // softmax(cos / tau) reproduces the Gaussian targets in both directions.
  double worst_zero = 0;
  for (int i = 0; i < 50; ++i) {
    const double sigma = 1 + i % 5, tau = 0.05 + 0.05 * (i % 4);
    const std::int64_t delta = 1 + i % 3;
    const double theta = std::acos(1 - tau * double(delta * delta) / (2 * sigma * sigma));
    const double phi = u(rng) * 3;  // common rotation of the plane
    std::vector<double> z{std::cos(phi), std::sin(phi), std::cos(phi + theta), std::sin(phi + theta)};
    worst_zero = std::max(worst_zero, scl(z, {0, delta}, z, {0, delta}, 2, sigma, tau));
  }
  Outcome o;
  o.pass = min_loss >= 0 && worst_zero <= 1e-6 && worst_scale <= 1e-6 && worst_shift <= 1e-6;
  o.detail = "min loss " + fmt("%.3g", min_loss) + " over 1000 inputs, matched-target loss " +
             fmt("%.1e", worst_zero) + ", rescale deviation " + fmt("%.1e", worst_scale) +
             ", translation deviation " + fmt("%.1e", worst_shift);
  return o;
}

// ---- 7-9 -------------------------------------------------------------------

struct ArmRun {
  std::vector<double> classification;
  std::vector<std::string> metrics_json;
  std::vector<std::vector<std::uint8_t>> checkpoints;
  TrialReport report;
};

struct EndToEnd {
  ArmRun mtf3, fwb3, mtf1;
  std::vector<std::vector<double>> localized;  // per seed: best entity mass per test video
  double seconds = 0;
};

const std::vector<std::uint64_t> kSeeds{0, 1, 2};

ArmRun run_arm(RunConfig cfg, const VideoCorpus& raw) {
  cfg.resolve();
  const auto corpus = select_corpus_layers(raw, cfg);
  ArmRun arm;
  arm.report = run_trials(kSeeds, [&](std::uint64_t seed) {
    auto trial = cfg;
    trial.train.seed = seed;
    auto r = run_experiment(trial, corpus);
    arm.classification.push_back(r.metrics.classification);
    arm.metrics_json.push_back(r.metrics.to_json());
    arm.checkpoints.push_back(encode_checkpoint(r.trained.model.params()));
    return metric_map(r.metrics);
  });
  return arm;
}

std::string describe(const char* name, const ArmRun& arm) {
  std::string s = std::string(name) + ":";
  for (const auto& [metric, summary] : arm.report.metrics) s += " " + metric + " " + summary.interval();
  return s;
}

EndToEnd end_to_end(const RunConfig& base) {
  const auto t0 = Clock::now();
  EndToEnd out;
  const auto raw = synthetic_corpus(base);

  auto mtf3 = base;
  mtf3.train.model.architecture = Architecture::mvformer;
  mtf3.train.model.entities = 3;
  auto fwb3 = base;
  fwb3.train.model.architecture = Architecture::fixed_width;
  fwb3.train.model.entities = 3;
  auto mtf1 = base;
  mtf1.train.model.architecture = Architecture::mvformer;
  mtf1.train.model.entities = 1;

  out.mtf3 = run_arm(mtf3, raw);
  out.fwb3 = run_arm(fwb3, raw);
  out.mtf1 = run_arm(mtf1, raw);
  out.seconds = seconds_since(t0);

  // Localization on the noiseless rendering of the same videos.
  auto clean = base.data;
  clean.noise_sigma = 0;
  const auto truth = generate_synthetic_dataset(clean);
  VideoCorpus clean_corpus{truth.videos, raw.is_test};
  mtf3.resolve();
  const auto selected = select_corpus_layers(clean_corpus, mtf3);
  for (std::size_t s = 0; s < kSeeds.size(); ++s) {
    const MvFormer model(mtf3.train.model, decode_checkpoint(out.mtf3.checkpoints[s]));
    std::vector<double> per_video;
    for (std::size_t i = 0; i < selected.videos.size(); ++i) {
      if (!selected.is_test[i]) continue;
      auto mass = actor_attention_mass(model, selected.videos[i], truth.truth[i],
                                       clean.grid_side, clean.actor_patch_side);
      per_video.push_back(*std::max_element(mass.begin(), mass.end()));
    }
    out.localized.push_back(std::move(per_video));
  }
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

void print(int id, const char* name, const Outcome& o) {
  std::cout << "criterion " << id << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << "  "
            << o.detail << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, known;
  std::string config_path = MVF_ACCEPTANCE_CONFIG;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if ((arg == "--only" || arg == "--known-failures") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) (arg == "--only" ? only : known).insert(std::stoi(item));
    } else if (arg == "--config" && i + 1 < argc) {
      config_path = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only N[,N...]] [--known-failures N[,N...]] [--config PATH]\n";
      return 1;
    }
  }
  auto wanted = [&](int id) { return only.empty() || only.count(id); };

  std::set<int> failed, ran;
  auto record = [&](int id, const char* name, const Outcome& o) {
    print(id, name, o);
    ran.insert(id);
    if (!o.pass) failed.insert(id);
  };

  try {
    if (wanted(1)) record(1, "gradient suite", gradient_suite());
    if (wanted(2)) record(2, "attention invariants", attention_invariants());
    if (wanted(3)) record(3, "MTF permutation invariants", mtf_permutations());
    if (wanted(4)) record(4, "width and parameter accounting", parameter_accounting());
    if (wanted(5)) record(5, "metric oracles", metric_oracles());
    if (wanted(6)) record(6, "SCL properties", scl_properties());

    if (wanted(7) || wanted(8) || wanted(9)) {
      const auto cfg = load_config(config_path);
      const auto first = end_to_end(cfg);
      std::cout << "  " << describe("MTF E=3", first.mtf3) << '\n'
                << "  " << describe("FWB N=3", first.fwb3) << '\n'
                << "  " << describe("MTF E=1", first.mtf1) << std::endl;

      const double m3 = mean(first.mtf3.classification), f3 = mean(first.fwb3.classification),
                   m1 = mean(first.mtf1.classification);
      if (wanted(7)) {
        Outcome o;
        const bool a = m3 >= 0.90, b = m3 >= f3, c = m3 >= m1 - 0.02;
        const bool fast = first.seconds < 15 * 60;
        o.pass = a && b && c && fast;
        o.detail = "(a) MTF E=3 classification " + fmt("%.4f", m3) + (a ? " >= " : " < ") +
                   "0.90; (b) vs FWB " + fmt("%.4f", f3) + (b ? " ok" : " not met") +
                   "; (c) vs E=1 " + fmt("%.4f", m1) + " - 0.02" + (c ? " ok" : " not met") +
                   "; " + fmt("%.0f", first.seconds) + " s";
        record(7, "synthetic end-to-end", o);
      }
      if (wanted(8)) {
        Outcome o;
        o.pass = true;
        std::string per_seed;
        for (std::size_t s = 0; s < first.localized.size(); ++s) {
          const auto& v = first.localized[s];
          const auto hits = std::count_if(v.begin(), v.end(), [](double m) { return m >= 0.40; });
          const double frac = double(hits) / double(v.size());
          o.pass = o.pass && frac >= 0.80;
          per_seed += (s ? ", " : "") + std::string("seed ") + std::to_string(kSeeds[s]) + " " +
                      std::to_string(hits) + "/" + std::to_string(v.size()) + " (best mass mean " +
                      fmt("%.3f", mean(v)) + ")";
        }
        o.detail = "test videos with an entity >= 0.40 in the actor patch: " + per_seed +
                   "; chance " + fmt("%.3f", 9.0 / 64);
        record(8, "actor localization", o);
      }
      if (wanted(9)) {
        const auto second = end_to_end(cfg);
        Outcome o;
        std::size_t same_ckpt = 0, same_json = 0, total = 0;
        for (auto [x, y] : {std::pair{&first.mtf3, &second.mtf3}, std::pair{&first.fwb3, &second.fwb3},
                            std::pair{&first.mtf1, &second.mtf1}})
          for (std::size_t s = 0; s < kSeeds.size(); ++s) {
            ++total;
            same_ckpt += x->checkpoints[s] == y->checkpoints[s];
            same_json += x->metrics_json[s] == y->metrics_json[s];
          }
        o.pass = same_ckpt == total && same_json == total;
        o.detail = "bit-identical checkpoints " + std::to_string(same_ckpt) + "/" +
                   std::to_string(total) + ", identical metric JSON " + std::to_string(same_json) +
                   "/" + std::to_string(total) + "; repeat took " + fmt("%.0f", second.seconds) +
                   " s";
        record(9, "determinism", o);
      }
    }
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  std::set<int> expected;
  for (int id : known)
    if (ran.count(id)) expected.insert(id);
  auto list = [](const std::set<int>& ids) {
    std::string s;
    for (int id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
    return s.empty() ? std::string("none") : s;
  };
  std::cout << "summary: " << ran.size() - failed.size() << "/" << ran.size()
            << " criteria passed; failed: " << list(failed) << "; known failures: " << list(expected)
            << std::endl;
  return failed == expected ? 0 : 1;
}

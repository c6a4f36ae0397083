#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "json.hpp"
#include "mvf/eval.hpp"
#include "mvf/random.hpp"

using namespace mvf;

namespace {

// O(n^2) pair counting.
double tau_oracle(const std::vector<std::size_t>& n) {
  long long c = 0, d = 0;
  for (std::size_t i = 0; i < n.size(); ++i)
    for (std::size_t j = i + 1; j < n.size(); ++j) {
      const long long s = (long long)(j - i) * ((long long)n[j] - (long long)n[i]);
      c += s > 0;
      d += s < 0;
    }
  return double(c - d) / (double(n.size()) * double(n.size() - 1) / 2);
}

// Full stable sort of every candidate, then the AP@k formula.
double ap_oracle(const std::vector<EmbeddedVideo>& videos, std::size_t k, std::size_t& skipped) {
  double sum = 0;
  std::size_t scored = 0;
  skipped = 0;
  for (std::size_t q = 0; q < videos.size(); ++q) {
    const auto& qe = videos[q].embeddings;
    for (std::size_t t = 0; t < qe.frames; ++t) {
      std::vector<std::pair<double, int>> all;  // (distance, relevant)
      for (std::size_t v = 0; v < videos.size(); ++v) {
        if (v == q) continue;
        const auto& ce = videos[v].embeddings;
        for (std::size_t f = 0; f < ce.frames; ++f) {
          double d = 0;
          for (std::size_t c = 0; c < qe.dim; ++c) {
            const double x = double(qe.values[t * qe.dim + c]) - ce.values[f * ce.dim + c];
            d += x * x;
          }
          all.emplace_back(d, videos[v].labels[f] == videos[q].labels[t]);
        }
      }
      std::stable_sort(all.begin(), all.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t R = 0;
      for (auto& a : all) R += a.second;
      if (!R) {
        ++skipped;
        continue;
      }
      double ap = 0;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < std::min(k, all.size()); ++i) {
        hits += all[i].second;
        if (all[i].second) ap += double(hits) / double(i + 1);
      }
      sum += ap / double(std::min(k, R));
      ++scored;
    }
  }
  return sum / double(scored);
}

FrameEmbeddingSequence seq(std::size_t frames, std::size_t dim, std::vector<float> values) {
  return {frames, dim, std::move(values)};
}

EmbeddedVideo random_video(Rng& rng, std::size_t frames, std::size_t dim, std::uint32_t classes,
                           std::string id, bool quantize = false) {
  EmbeddedVideo v;
  v.video_id = std::move(id);
  auto vals = normal_vector(rng, frames * dim);
  // Quantized coordinates produce distance ties.
  if (quantize)
    for (auto& x : vals) x = std::round(x);
  v.embeddings = seq(frames, dim, vals);
  for (std::size_t t = 0; t < frames; ++t) {
    v.labels.push_back(std::uint32_t(rng() % classes));
    v.progression.push_back(float(t) / float(frames));
  }
  return v;
}

std::vector<float> rotate(const std::vector<float>& values, std::size_t dim,
                          const std::vector<double>& q) {
  std::vector<float> out(values.size());
  for (std::size_t r = 0; r < values.size() / dim; ++r)
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < dim; ++i) s += values[r * dim + i] * q[i * dim + j];
      out[r * dim + j] = float(s);
    }
  return out;
}

// Random orthogonal matrix by Gram-Schmidt.
std::vector<double> random_orthogonal(Rng& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> q(n * n);
  for (auto& x : q) x = g(rng);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0;
      for (std::size_t r = 0; r < n; ++r) dot += q[r * n + c] * q[r * n + p];
      for (std::size_t r = 0; r < n; ++r) q[r * n + c] -= dot * q[r * n + p];
    }
    double norm = 0;
    for (std::size_t r = 0; r < n; ++r) norm += q[r * n + c] * q[r * n + c];
    for (std::size_t r = 0; r < n; ++r) q[r * n + c] /= std::sqrt(norm);
  }
  return q;
}

}  // namespace

TEST_CASE("kendall's tau examples") {
  std::vector<std::size_t> id{0, 1, 2, 3, 4}, rev{4, 3, 2, 1, 0}, ex{2, 0, 1};
  CHECK(kendalls_tau(id) == 1.0);
  CHECK(kendalls_tau(rev) == -1.0);
  CHECK(kendalls_tau(ex) == doctest::Approx(-1.0 / 3).epsilon(1e-15));
  CHECK(kendalls_tau(std::vector<std::size_t>{3, 3, 3}) == 0.0);
  CHECK_THROWS_AS(kendalls_tau(std::vector<std::size_t>{1}), std::invalid_argument);
}

TEST_CASE("kendall's tau matches pair counting") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 49, range = 1 + rng() % 60;
    std::vector<std::size_t> a(n);
    for (auto& x : a) x = rng() % range;
    CHECK(kendalls_tau(a) == tau_oracle(a));
  }
}

TEST_CASE("nearest neighbours break ties toward the lower index") {
  auto a = seq(2, 1, {0.f, 10.f});
  auto b = seq(4, 1, {1.f, -1.f, 9.f, 11.f});
  CHECK(nearest_neighbors(a, b) == std::vector<std::size_t>{0, 2});
  auto self = seq(3, 2, {0, 0, 1, 1, 2, 2});
  CHECK(kendalls_tau(self, self) == 1.0);
}

TEST_CASE("AP@k examples") {
  std::vector<std::uint8_t> all{1, 1, 1, 1, 1}, none{0, 0, 0, 0, 0}, mixed{1, 0, 1, 0, 0};
  CHECK(average_precision_at_k(all, 10, 5) == 1.0);
  CHECK(average_precision_at_k(none, 3, 5) == 0.0);
  CHECK(average_precision_at_k(mixed, 2, 5) == doctest::Approx((1 + 2.0 / 3) / 2).epsilon(1e-15));
  CHECK(average_precision_at_k(mixed, 2, 5) == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK_THROWS_AS(average_precision_at_k(mixed, 0, 5), std::invalid_argument);
}

TEST_CASE("retrieval matches the full-sort oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nv = 2 + rng() % 4, frames = 1 + rng() % 40, dim = 1 + rng() % 4;
    std::vector<EmbeddedVideo> videos;
    for (std::size_t v = 0; v < nv; ++v)
      videos.push_back(random_video(rng, frames, dim, 1 + rng() % 4, "v", trial % 2 == 0));
    const std::size_t k = 1 + rng() % 6;
    std::size_t skipped = 0;
    const double want = ap_oracle(videos, k, skipped);
    auto got = retrieval_ap_at_k(videos, k);
    if (got.queries == skipped) continue;
    CHECK(got.mean == want);
    CHECK(got.skipped == skipped);
  }
}

TEST_CASE("R squared examples") {
  std::vector<double> t{0, 1, 2};
  CHECK(r2_score(t, std::vector<double>{0, 1, 2}) == 1.0);
  CHECK(r2_score(t, std::vector<double>{1, 1, 1}) == 0.0);
  CHECK(r2_score(t, std::vector<double>{0, 1, 1}) == 0.5);
  CHECK_THROWS_AS(r2_score(std::vector<double>{1, 1}, std::vector<double>{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("ridge progression recovers a linear target and skips constant videos") {
  Rng rng(4);
  std::vector<EmbeddedVideo> train, test;
  const std::vector<double> w{0.3, -0.2, 0.1};
  auto make = [&](std::string id, bool constant) {
    EmbeddedVideo v;
    v.video_id = id;
    v.embeddings = seq(10, 3, normal_vector(rng, 30));
    for (std::size_t t = 0; t < 10; ++t) {
      double y = 0.5;
      for (std::size_t c = 0; c < 3; ++c) y += w[c] * v.embeddings.values[t * 3 + c];
      v.progression.push_back(constant ? 0.25f : float(y));
      v.labels.push_back(0);
    }
    return v;
  };
  for (int i = 0; i < 5; ++i) train.push_back(make("tr" + std::to_string(i), false));
  test.push_back(make("te0", false));
  test.push_back(make("flat", true));
  auto r = phase_progression_r2(train, test, 1e-4);
  CHECK(r.mean > 0.999);
  REQUIRE(r.excluded.size() == 1);
  CHECK(r.excluded[0] == "flat");
  std::vector<EmbeddedVideo> only_flat{test[1]};
  CHECK_THROWS_AS(phase_progression_r2(train, only_flat, 1e-4), std::invalid_argument);
}

TEST_CASE("linear probe: separable, chance level, single class") {
  std::vector<EmbeddedVideo> train(1), test(1);
  Rng rng(6);
  for (auto* v : {&train[0], &test[0]}) {
    std::vector<float> vals;
    for (std::size_t t = 0; t < 40; ++t) {
      const bool pos = t % 2 == 0;
      vals.push_back(pos ? 1.f : -1.f);
      vals.push_back(0.f);
      vals.push_back(float(normal_vector(rng, 1)[0] * 0.01));
      v->labels.push_back(pos ? 1 : 0);
      v->progression.push_back(0);
    }
    v->embeddings = seq(40, 3, vals);
  }
  CHECK(linear_probe_classification(train, test, 200, 0.5) == 1.0);
  CHECK(linear_probe_classification(train, test, 200, 0.5) ==
        linear_probe_classification(train, test, 200, 0.5));

  double sum = 0;
  for (int seed = 0; seed < 5; ++seed) {
    Rng r(100 + seed);
    std::vector<EmbeddedVideo> tr, te;
    for (int i = 0; i < 8; ++i) tr.push_back(random_video(r, 32, 16, 4, "a"));
    for (int i = 0; i < 2; ++i) te.push_back(random_video(r, 32, 16, 4, "b"));
    sum += linear_probe_classification(tr, te, 300, 0.5);
  }
  CHECK(std::abs(sum / 5 - 0.25) <= 0.15);

  for (auto& l : train[0].labels) l = 2;
  CHECK_THROWS_AS(linear_probe_classification(train, test, 10, 0.5), std::invalid_argument);
}

TEST_CASE("metric invariances") {
  Rng rng(8);
  std::vector<EmbeddedVideo> videos;
  for (int i = 0; i < 4; ++i) videos.push_back(random_video(rng, 20, 6, 3, "v"));
  const auto q = random_orthogonal(rng, 6);
  auto rotated = videos;
  for (auto& v : rotated) v.embeddings.values = rotate(v.embeddings.values, 6, q);
  CHECK(dataset_kendalls_tau(rotated) == dataset_kendalls_tau(videos));
  CHECK(retrieval_ap_at_k(rotated, 5).mean == retrieval_ap_at_k(videos, 5).mean);

  // Coordinate permutation leaves the probe unchanged.
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  auto permuted = videos;
  for (std::size_t i = 0; i < videos.size(); ++i)
    for (std::size_t t = 0; t < 20; ++t)
      for (std::size_t c = 0; c < 6; ++c)
        permuted[i].embeddings.values[t * 6 + c] = videos[i].embeddings.values[t * 6 + perm[c]];
  std::span<const EmbeddedVideo> tr(videos.data(), 3), te(videos.data() + 3, 1);
  std::span<const EmbeddedVideo> ptr(permuted.data(), 3), pte(permuted.data() + 3, 1);
  CHECK(linear_probe_classification(ptr, pte, 100, 0.5) ==
        doctest::Approx(linear_probe_classification(tr, te, 100, 0.5)));
}

TEST_CASE("metrics report") {
  Rng rng(12);
  EmbeddedDataset ds;
  for (int i = 0; i < 4; ++i) ds.train.push_back(random_video(rng, 16, 5, 3, "t"));
  for (int i = 0; i < 3; ++i) ds.test.push_back(random_video(rng, 16, 5, 3, "e"));
  auto report = evaluate(ds, ProbeConfig{});
  auto j = nlohmann::json::parse(report.to_json());
  CHECK(j.size() == 4);
  for (const char* key : {"classification", "progression", "tau", "retrieval_ap5"}) {
    REQUIRE(j.contains(key));
    CHECK(std::isfinite(j[key].get<double>()));
  }
  CHECK(report.classification >= 0);
  CHECK(report.classification <= 1);
  CHECK(std::abs(report.tau) <= 1);
  CHECK(report.retrieval_ap5 >= 0);
  CHECK(report.retrieval_ap5 <= 1);

  ds.test.clear();
  CHECK_THROWS_AS(evaluate(ds, ProbeConfig{}), std::invalid_argument);
}

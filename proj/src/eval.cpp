#include "mvf/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace mvf {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t total_frames(std::span<const EmbeddedVideo> videos) {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.embeddings.frames;
  return n;
}

Matrix stack(std::span<const EmbeddedVideo> videos) {
  if (videos.empty()) return {};
  const std::size_t d = videos[0].embeddings.dim;
  Matrix x(Eigen::Index(total_frames(videos)), Eigen::Index(d));
  Eigen::Index r = 0;
  for (const auto& v : videos) {
    for (std::size_t t = 0; t < v.embeddings.frames; ++t, ++r) {
      for (std::size_t c = 0; c < d; ++c) x(r, Eigen::Index(c)) = v.embeddings.values[t * d + c];
    }
  }
  return x;
}

double squared_distance(const FrameEmbeddingSequence& a, std::size_t i,
                        const FrameEmbeddingSequence& b, std::size_t j) {
  double s = 0;
  for (std::size_t c = 0; c < a.dim; ++c) {
    const double d = double(a.values[i * a.dim + c]) - double(b.values[j * b.dim + c]);
    s += d * d;
  }
  return s;
}

}  // namespace

void EmbeddedDataset::validate() const {
  if (train.empty() || test.empty()) {
    throw std::invalid_argument("embedded dataset needs nonempty train and test splits");
  }
  const std::size_t d = train[0].embeddings.dim;
  for (const auto* split : {&train, &test}) {
    for (const auto& v : *split) {
      const auto& e = v.embeddings;
      if (e.dim != d || e.values.size() != e.frames * e.dim) {
        throw std::invalid_argument("video " + v.video_id + " has malformed embeddings");
      }
      if (v.labels.size() != e.frames || v.progression.size() != e.frames) {
        throw std::invalid_argument("video " + v.video_id +
                                    " annotations do not match its frame count");
      }
    }
  }
}

double linear_probe_classification(std::span<const EmbeddedVideo> train,
                                   std::span<const EmbeddedVideo> test, std::size_t epochs,
                                   double learning_rate) {
  std::uint32_t max_label = 0;
  std::vector<std::uint32_t> seen;
  for (const auto& v : train)
    for (auto l : v.labels) {
      max_label = std::max(max_label, l);
      if (std::find(seen.begin(), seen.end(), l) == seen.end()) seen.push_back(l);
    }
  if (seen.size() < 2) {
    throw std::invalid_argument("linear probe needs at least two classes in the training split");
  }
  const Eigen::Index C = Eigen::Index(max_label) + 1;
  Matrix x = stack(train);
  const Eigen::Index n = x.rows(), d = x.cols();

  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd stdev =
      ((x.rowwise() - mean).array().square().colwise().sum() / double(n)).sqrt();
  for (Eigen::Index c = 0; c < d; ++c)
    if (!(stdev(c) > 1e-12)) stdev(c) = 1;
  auto standardize = [&](Matrix m) {
    m.rowwise() -= mean;
    m.array().rowwise() /= stdev.array();
    return m;
  };
  x = standardize(std::move(x));

  Matrix y = Matrix::Zero(n, C);
  {
    Eigen::Index r = 0;
    for (const auto& v : train)
      for (auto l : v.labels) y(r++, Eigen::Index(l)) = 1;
  }
  Matrix w = Matrix::Zero(d, C);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(C);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Matrix p = x * w;
    p.rowwise() += b;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double mx = p.row(r).maxCoeff();
      p.row(r) = (p.row(r).array() - mx).exp();
      p.row(r) /= p.row(r).sum();
    }
    p -= y;
    w.noalias() -= (learning_rate / double(n)) * (x.transpose() * p);
    b -= (learning_rate / double(n)) * p.colwise().sum();
  }

  Matrix xt = standardize(stack(test));
  Matrix logits = xt * w;
  logits.rowwise() += b;
  std::size_t correct = 0;
  Eigen::Index r = 0;
  for (const auto& v : test) {
    for (auto l : v.labels) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < C; ++c)
        if (logits(r, c) > logits(r, best)) best = c;
      correct += std::uint32_t(best) == l;
      ++r;
    }
  }
  const std::size_t total = total_frames(test);
  return total ? double(correct) / double(total) : 0.0;
}

double r2_score(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size() || targets.empty()) {
    throw std::invalid_argument("r2_score needs equal, nonempty target and prediction lists");
  }
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / double(targets.size());
  double res = 0, tot = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (!(tot > 0)) throw std::invalid_argument("r2_score: targets have zero variance");
  return 1 - res / tot;
}

R2Result phase_progression_r2(std::span<const EmbeddedVideo> train,
                              std::span<const EmbeddedVideo> test, double lambda) {
  Matrix x = stack(train);
  Eigen::VectorXd y(x.rows());
  {
    Eigen::Index r = 0;
    for (const auto& v : train)
      for (float p : v.progression) y(r++) = p;
  }
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  x.rowwise() -= xm;
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd w = gram.ldlt().solve(x.transpose() * (y.array() - ym).matrix());
  const double bias = ym - xm.dot(w);

  R2Result result;
  double sum = 0;
  std::size_t used = 0;
  for (const auto& v : test) {
    std::vector<double> targets(v.progression.begin(), v.progression.end());
    const double first = targets.empty() ? 0 : targets[0];
    if (std::all_of(targets.begin(), targets.end(), [&](double t) { return t == first; })) {
      result.excluded.push_back(v.video_id);
      continue;
    }
    std::vector<double> pred(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      double s = bias;
      for (std::size_t c = 0; c < v.embeddings.dim; ++c)
        s += w(Eigen::Index(c)) * v.embeddings.values[t * v.embeddings.dim + c];
      pred[t] = s;
    }
    sum += r2_score(targets, pred);
    ++used;
  }
  if (used == 0) {
    throw std::invalid_argument("no test video has varying progression targets");
  }
  result.mean = sum / double(used);
  return result;
}

std::vector<std::size_t> nearest_neighbors(const FrameEmbeddingSequence& a,
                                           const FrameEmbeddingSequence& b) {
  if (a.dim != b.dim) throw DimensionError("nearest_neighbors embedding widths differ");
  if (b.frames == 0) throw std::invalid_argument("nearest_neighbors: empty target sequence");
  std::vector<std::size_t> nn(a.frames);
  for (std::size_t i = 0; i < a.frames; ++i) {
    std::size_t best = 0;
    double best_d = squared_distance(a, i, b, 0);
    for (std::size_t j = 1; j < b.frames; ++j) {
      const double d = squared_distance(a, i, b, j);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    nn[i] = best;
  }
  return nn;
}

double kendalls_tau(std::span<const std::size_t> assignment) {
  const std::size_t n = assignment.size();
  if (n < 2) throw std::invalid_argument("kendalls_tau needs at least two frames");
  // Fenwick tree over assigned values, filled in frame order.
  const std::size_t m = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::int64_t> tree(m + 1, 0);
  auto prefix = [&](std::size_t i) {  // count of values < i
    std::int64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  };
  std::int64_t concordant = 0, discordant = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t v = assignment[j];
    const std::int64_t below = prefix(v);
    const std::int64_t not_above = prefix(v + 1);
    concordant += below;
    discordant += std::int64_t(j) - not_above;
    for (std::size_t i = v + 1; i <= m; i += i & (~i + 1)) ++tree[i];
  }
  const double pairs = double(n) * double(n - 1) / 2;
  return double(concordant - discordant) / pairs;
}

double kendalls_tau(const FrameEmbeddingSequence& a, const FrameEmbeddingSequence& b) {
  return kendalls_tau(nearest_neighbors(a, b));
}

double dataset_kendalls_tau(std::span<const EmbeddedVideo> videos) {
  if (videos.size() < 2) throw std::invalid_argument("tau needs at least two videos");
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < videos.size(); ++a)
    for (std::size_t b = 0; b < videos.size(); ++b) {
      if (a == b) continue;
      sum += kendalls_tau(videos[a].embeddings, videos[b].embeddings);
      ++count;
    }
  return sum / double(count);
}

double average_precision_at_k(std::span<const std::uint8_t> ranked_relevance,
                              std::size_t total_relevant, std::size_t k) {
  if (k == 0) throw std::invalid_argument("AP@k needs k >= 1");
  if (total_relevant == 0) throw std::invalid_argument("AP@k undefined without relevant items");
  double ap = 0;
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked_relevance.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (!ranked_relevance[i]) continue;
    ++hits;
    ap += double(hits) / double(i + 1);
  }
  return ap / double(std::min(k, total_relevant));
}

RetrievalResult retrieval_ap_at_k(std::span<const EmbeddedVideo> videos, std::size_t k) {
  if (k == 0) throw std::invalid_argument("AP@k needs k >= 1");
  struct Candidate {
    std::size_t video, frame;
  };
  std::vector<Candidate> pool;
  for (std::size_t v = 0; v < videos.size(); ++v)
    for (std::size_t t = 0; t < videos[v].embeddings.frames; ++t) pool.push_back({v, t});

  RetrievalResult result;
  double sum = 0;
  std::vector<std::pair<double, std::size_t>> ranked;
  std::vector<std::uint8_t> relevance;
  for (std::size_t q = 0; q < videos.size(); ++q) {
    const auto& query = videos[q];
    for (std::size_t t = 0; t < query.embeddings.frames; ++t) {
      ++result.queries;
      ranked.clear();
      std::size_t relevant = 0;
      for (std::size_t c = 0; c < pool.size(); ++c) {
        const auto& cand = pool[c];
        if (cand.video == q) continue;
        ranked.emplace_back(
            squared_distance(query.embeddings, t, videos[cand.video].embeddings, cand.frame), c);
        relevant += videos[cand.video].labels[cand.frame] == query.labels[t];
      }
      if (relevant == 0) {
        ++result.skipped;
        continue;
      }
      const std::size_t depth = std::min(k, ranked.size());
      std::partial_sort(ranked.begin(), ranked.begin() + std::ptrdiff_t(depth), ranked.end());
      relevance.assign(depth, 0);
      for (std::size_t i = 0; i < depth; ++i) {
        const auto& cand = pool[ranked[i].second];
        relevance[i] = videos[cand.video].labels[cand.frame] == query.labels[t];
      }
      sum += average_precision_at_k(relevance, relevant, k);
    }
  }
  const std::size_t scored = result.queries - result.skipped;
  result.mean = scored ? sum / double(scored) : 0.0;
  return result;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["classification"] = classification;
  j["progression"] = progression;
  j["tau"] = tau;
  j["retrieval_ap5"] = retrieval_ap5;
  return j.dump(2);
}

MetricsReport evaluate(const EmbeddedDataset& dataset, const ProbeConfig& config) {
  dataset.validate();
  MetricsReport report;
  report.classification = linear_probe_classification(dataset.train, dataset.test,
                                                       config.epochs, config.learning_rate);
  auto r2 = phase_progression_r2(dataset.train, dataset.test, config.ridge_lambda);
  report.progression = r2.mean;
  for (const auto& id : r2.excluded) {
    report.warnings.push_back("progression: video " + id + " has constant targets; excluded");
  }
  report.tau = dataset_kendalls_tau(dataset.test);
  auto ap = retrieval_ap_at_k(dataset.test, config.retrieval_k);
  report.retrieval_ap5 = ap.mean;
  if (ap.skipped) {
    report.warnings.push_back("retrieval: " + std::to_string(ap.skipped) + " of " +
                              std::to_string(ap.queries) +
                              " queries had no relevant candidate; skipped");
  }
  return report;
}

}  // namespace mvf

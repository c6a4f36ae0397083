#include "mvf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mvf/random.hpp"

namespace mvf {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (view_length < 2) fail("view_length must be at least 2");
  if (!(sigma > 0)) fail("sigma must be positive");
  if (!(temperature > 0)) fail("temperature must be positive");
  if (!(learning_rate >= 0)) fail("learning_rate must be nonnegative");
  if (!(beta1 >= 0 && beta1 < 1)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) fail("beta2 must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!layer_ids.empty() && layer_ids.size() != model.layers) {
    fail("layer selection has " + std::to_string(layer_ids.size()) + " entries but model expects " +
         std::to_string(model.layers) + " layers");
  }
  model.mtf().validate();
}

std::pair<View, View> sample_two_views(const VideoFeatures& video, std::size_t view_length,
                                       std::uint64_t seed) {
  const std::size_t T = video.num_frames;
  if (view_length == 0 || view_length > T) {
    throw std::invalid_argument("video " + video.video_id + " has " + std::to_string(T) +
                                " frames, view needs " + std::to_string(view_length));
  }
  Rng rng(mix_seed(seed, 0x4000));
  auto draw = [&] {
    std::vector<std::size_t> pool(T);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < view_length; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, T - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    View v;
    v.frames.assign(pool.begin(), pool.begin() + std::ptrdiff_t(view_length));
    std::sort(v.frames.begin(), v.frames.end());
    for (auto f : v.frames) v.timestamps.push_back(video.timestamps[f]);
    return v;
  };
  View a = draw();
  View b = draw();
  return {std::move(a), std::move(b)};
}

std::vector<double> gaussian_targets(std::span<const std::int64_t> a,
                                     std::span<const std::int64_t> b, double sigma) {
  std::vector<double> g(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    // Shift by the largest exponent so the row never underflows to all zeros.
    double best = -INFINITY;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = double(a[i] - b[j]);
      g[i * b.size() + j] = -d * d / (2 * sigma * sigma);
      best = std::max(best, g[i * b.size() + j]);
    }
    double z = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      auto& x = g[i * b.size() + j];
      x = std::exp(x - best);
      z += x;
    }
    for (std::size_t j = 0; j < b.size(); ++j) g[i * b.size() + j] /= z;
  }
  return g;
}

double kl_divergence(std::span<const double> g, std::span<const double> p) {
  if (g.size() != p.size()) throw DimensionError("kl_divergence length mismatch");
  double kl = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] > 0) kl += g[j] * (std::log(g[j]) - std::log(p[j]));
  }
  return kl;
}

namespace {

// Unit rows and their norms; throws on a zero row.
template <typename Real>
std::pair<std::vector<double>, std::vector<double>> unit_rows(std::span<const Real> z,
                                                              std::size_t rows, std::size_t dim) {
  std::vector<double> u(rows * dim), norm(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < dim; ++c) s += double(z[i * dim + c]) * z[i * dim + c];
    norm[i] = std::sqrt(s);
    if (norm[i] == 0) {
      throw ContractError("scl_loss: embedding row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t c = 0; c < dim; ++c) u[i * dim + c] = z[i * dim + c] / norm[i];
  }
  return {std::move(u), std::move(norm)};
}

// Row softmax of logits in place; returns log-probabilities alongside.
std::vector<double> log_softmax_rows(std::vector<double>& x, std::size_t rows, std::size_t cols) {
  std::vector<double> logp(x.size());
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, x[i * cols + j]);
    double z = 0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[i * cols + j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) {
      logp[i * cols + j] = x[i * cols + j] - lz;
      x[i * cols + j] = std::exp(logp[i * cols + j]);
    }
  }
  return logp;
}

}  // namespace

template <typename Real>
Var<Real> scl_loss(Var<Real> z1, std::span<const std::int64_t> t1, Var<Real> z2,
                   std::span<const std::int64_t> t2, double sigma, double temperature) {
  if (z1.shape().size() != 2 || z2.shape().size() != 2 || z1.cols() != z2.cols()) {
    throw DimensionError("scl_loss embeddings " + shape_str(z1.shape()) + " and " +
                         shape_str(z2.shape()));
  }
  const std::size_t n1 = z1.rows(), n2 = z2.rows(), d = z1.cols();
  if (t1.size() != n1 || t2.size() != n2) {
    throw DimensionError("scl_loss timestamps do not match embedding rows");
  }
  if (!(sigma > 0) || !(temperature > 0)) {
    throw ContractError("scl_loss needs positive sigma and temperature");
  }
  auto [u1, r1] = unit_rows<Real>(z1.value(), n1, d);
  auto [u2, r2] = unit_rows<Real>(z2.value(), n2, d);

  std::vector<double> s(n1 * n2);  // cos / temperature
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      double c = 0;
      for (std::size_t k = 0; k < d; ++k) c += u1[i * d + k] * u2[j * d + k];
      s[i * n2 + j] = c / temperature;
    }
  std::vector<double> st(n2 * n1);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) st[j * n1 + i] = s[i * n2 + j];

  const auto g12 = gaussian_targets(t1, t2, sigma);
  const auto g21 = gaussian_targets(t2, t1, sigma);
  auto p12 = s;
  auto p21 = st;
  const auto lp12 = log_softmax_rows(p12, n1, n2);
  const auto lp21 = log_softmax_rows(p21, n2, n1);

  double l12 = 0, l21 = 0;
  for (std::size_t k = 0; k < g12.size(); ++k)
    if (g12[k] > 0) l12 += g12[k] * (std::log(g12[k]) - lp12[k]);
  for (std::size_t k = 0; k < g21.size(); ++k)
    if (g21[k] > 0) l21 += g21[k] * (std::log(g21[k]) - lp21[k]);
  // Rounding can leave a tiny negative sum when P equals G.
  double loss = 0.5 * (l12 / double(n1) + l21 / double(n2));
  if (loss < 0) loss = 0;

  // d loss / d s_ij, combining both directions.
  std::vector<double> ds(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      ds[i * n2 + j] = 0.5 * ((p12[i * n2 + j] - g12[i * n2 + j]) / double(n1) +
                              (p21[j * n1 + i] - g21[j * n1 + i]) / double(n2));
    }

  const auto i1 = z1.id, i2 = z2.id;
  return z1.tape->record(
      {1}, {static_cast<Real>(loss)}, {z1, z2},
      [=, u1 = std::move(u1), u2 = std::move(u2), r1 = std::move(r1), r2 = std::move(r2),
       ds = std::move(ds)](Tape<Real>& t, std::size_t self) {
        const double g = t.node(self).grad[0];
        // Gradient w.r.t. unit rows, then through the normalization.
        auto push = [&](std::size_t id, const std::vector<double>& u, const std::vector<double>& r,
                        const std::vector<double>& other, std::size_t rows, std::size_t others,
                        bool first) {
          if (!t.node(id).requires_grad) return;
          auto& gz = t.grad_buffer(id);
          std::vector<double> du(d);
          for (std::size_t i = 0; i < rows; ++i) {
            std::fill(du.begin(), du.end(), 0.0);
            for (std::size_t j = 0; j < others; ++j) {
              const double w = (first ? ds[i * others + j] : ds[j * rows + i]) * g / temperature;
              for (std::size_t k = 0; k < d; ++k) du[k] += w * other[j * d + k];
            }
            double dot = 0;
            for (std::size_t k = 0; k < d; ++k) dot += du[k] * u[i * d + k];
            for (std::size_t k = 0; k < d; ++k) {
              gz[i * d + k] += static_cast<Real>((du[k] - u[i * d + k] * dot) / r[i]);
            }
          }
        };
        push(i1, u1, r1, u2, n1, n2, true);
        push(i2, u2, r2, u1, n2, n1, false);
      });
}

template Var<float> scl_loss(Var<float>, std::span<const std::int64_t>, Var<float>,
                             std::span<const std::int64_t>, double, double);
template Var<double> scl_loss(Var<double>, std::span<const std::int64_t>, Var<double>,
                              std::span<const std::int64_t>, double, double);

AdamState AdamState::for_params(const ParameterSet& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.size(), 0.f);
    s.v.emplace_back(p.value.size(), 0.f);
  }
  return s;
}

void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam state holds " + std::to_string(state.m.size()) +
                         " moments for " + std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double c1 = 1 - std::pow(config.beta1, double(state.step));
  const double c2 = 1 - std::pow(config.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size() || v.size() != p.size() || p.grad.size() != p.size()) {
      throw DimensionError("adam moments for " + params[i].name + " do not match " +
                           shape_str(p.shape));
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      m[k] = float(config.beta1 * m[k] + (1 - config.beta1) * g);
      v[k] = float(config.beta2 * v[k] + (1 - config.beta2) * g * g);
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      p.data[k] = float(p.data[k] - config.learning_rate * mhat / (std::sqrt(vhat) + config.eps));
    }
  }
}

std::string format_loss_line(std::size_t step, float loss) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu\t%.6g\n", step, double(loss));
  return buf;
}

TrainResult train(std::span<const VideoFeatures> videos, const TrainConfig& config,
                  const StepCallback& on_step) {
  config.validate();
  if (videos.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& v : videos) {
    if (v.num_layers != config.model.layers || v.channels != config.model.channels) {
      throw DimensionError("video " + v.video_id + " has " + std::to_string(v.num_layers) +
                           " layers of " + std::to_string(v.channels) +
                           " channels; model expects " + std::to_string(config.model.layers) +
                           " of " + std::to_string(config.model.channels));
    }
  }
  TrainResult result{MvFormer(config.model, config.seed), {}};
  auto& params = result.model.params();
  AdamState state = AdamState::for_params(params);
  const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, config.adam_eps};

  Rng order_rng(mix_seed(config.seed, 0x5000));
  std::vector<std::size_t> order(videos.size());
  std::size_t cursor = order.size();
  const std::size_t batch = std::min(config.batch_size, videos.size());

  for (std::size_t step = 0; step < config.steps; ++step) {
    params.zero_grad();
    double total = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const std::size_t vi = order[cursor++];
      const auto& video = videos[vi];
      auto [v1, v2] =
          sample_two_views(video, config.view_length, mix_seed(mix_seed(config.seed, step), vi));
      Tape<float> tape;
      Binder<float> bind(tape, params);
      auto o1 = result.model.forward(bind, video, v1.frames);
      auto o2 = result.model.forward(bind, video, v2.frames);
      auto loss = scl_loss(o1.projection, v1.timestamps, o2.projection, v2.timestamps,
                           config.sigma, config.temperature);
      const float value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step) + " (video " +
                            video.video_id + ")");
      }
      total += value;
      tape.backward(scale(loss, 1.f / float(batch)));
      bind.accumulate_into(params);
    }
    const float mean = float(total / double(batch));
    result.losses.push_back(mean);
    if (on_step) on_step(step, mean);
    adam_step(params, state, adam);
  }
  return result;
}

std::string MetricSummary::interval() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean, 2 * stdev);
  return buf;
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.values = std::move(values);
  const double n = double(s.values.size());
  if (s.values.empty()) return s;
  // Accumulate offsets from the first value so repeated values stay exact.
  const double first = s.values.front();
  double offset = 0;
  for (double v : s.values) offset += v - first;
  s.mean = first + offset / n;
  if (s.values.size() >= 2) {
    double ss = 0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / (n - 1));
  }
  return s;
}

TrialReport run_trials(std::span<const std::uint64_t> seeds, const TrialFn& trial) {
  if (seeds.size() < 2) throw std::invalid_argument("run_trials needs at least two seeds");
  TrialReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  std::map<std::string, std::vector<double>> collected;
  for (auto seed : seeds) {
    std::map<std::string, double> metrics;
    try {
      metrics = trial(seed);
    } catch (const std::exception& e) {
      throw TrainingError("trial with seed " + std::to_string(seed) + " failed: " + e.what());
    }
    for (const auto& [name, value] : metrics) collected[name].push_back(value);
  }
  for (auto& [name, values] : collected) {
    if (values.size() != seeds.size()) {
      throw TrainingError("metric " + name + " missing from some trials");
    }
    report.metrics[name] = summarize(std::move(values));
  }
  return report;
}

}  // namespace mvf

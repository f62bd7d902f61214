#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "frontcast/errors.hpp"
#include "frontcast/framing.hpp"

namespace frontcast {

namespace detail {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

/// y += M x
inline void matvec_acc(const Mat& m, std::span<const double> x, std::span<double> y) {
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    const double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) s += row[j] * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] += s;
  }
}

/// y += M^T x
inline void matvec_transpose_acc(const Mat& m, std::span<const double> x, std::span<double> y) {
  for (int i = 0; i < m.rows; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    const double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) y[static_cast<std::size_t>(j)] += row[j] * xi;
  }
}

/// M += a ⊗ b
inline void outer_acc(Mat& m, std::span<const double> a, std::span<const double> b) {
  for (int i = 0; i < m.rows; ++i) {
    const double ai = a[static_cast<std::size_t>(i)];
    double* row = m.a.data() + static_cast<std::size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) row[j] += ai * b[static_cast<std::size_t>(j)];
  }
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

enum class CandidateActivation { Tanh, Sigmoid };

/// Gate weights of a single-layer LSTM with a linear output map and no
/// biases by default. The forward pass is
///   f,i,o = logistic(W_* x + U_* h)
///   c~    = act(W_c x + U_c h)        (tanh by default, logistic optional)
///   c     = f.c_prev + i.c~
///   h     = o.tanh(c)
///   y     = w_out . h
struct LstmModel {
  int input_dim = 0;
  int hidden_dim = 0;
  CandidateActivation candidate = CandidateActivation::Tanh;
  bool use_bias = false;

  detail::Mat w_f, w_i, w_o, w_c;  // H x k
  detail::Mat u_f, u_i, u_o, u_c;  // H x H
  std::vector<double> w_out;       // H
  std::vector<double> b_f, b_i, b_o, b_c;  // H when use_bias

  /// Visits every parameter array in a fixed order (also the file order).
  template <typename F>
  void for_each_param(F&& f) {
    f(w_f.a);
    f(w_i.a);
    f(w_o.a);
    f(w_c.a);
    f(u_f.a);
    f(u_i.a);
    f(u_o.a);
    f(u_c.a);
    f(w_out);
    if (use_bias) {
      f(b_f);
      f(b_i);
      f(b_o);
      f(b_c);
    }
  }

  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<LstmModel*>(this)->for_each_param(
        [&f](std::vector<double>& v) { f(static_cast<const std::vector<double>&>(v)); });
  }
};

inline LstmModel make_model(int input_dim, int hidden_dim,
                            CandidateActivation candidate = CandidateActivation::Tanh,
                            bool use_bias = false) {
  if (input_dim < 1 || hidden_dim < 1) throw ConfigError("lstm: dimensions must be positive");
  LstmModel m;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.candidate = candidate;
  m.use_bias = use_bias;
  m.w_f = detail::Mat(hidden_dim, input_dim);
  m.w_i = detail::Mat(hidden_dim, input_dim);
  m.w_o = detail::Mat(hidden_dim, input_dim);
  m.w_c = detail::Mat(hidden_dim, input_dim);
  m.u_f = detail::Mat(hidden_dim, hidden_dim);
  m.u_i = detail::Mat(hidden_dim, hidden_dim);
  m.u_o = detail::Mat(hidden_dim, hidden_dim);
  m.u_c = detail::Mat(hidden_dim, hidden_dim);
  m.w_out.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  if (use_bias) {
    m.b_f.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    m.b_i.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    m.b_o.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    m.b_c.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  }
  return m;
}

/// Seeded uniform init in [-1/sqrt(H), 1/sqrt(H)].
inline void init_weights(LstmModel& m, std::mt19937& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(m.hidden_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  m.for_each_param([&](std::vector<double>& p) {
    for (double& v : p) v = dist(rng);
  });
}

inline LstmModel zero_like(const LstmModel& m) {
  return make_model(m.input_dim, m.hidden_dim, m.candidate, m.use_bias);
}

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

inline LstmState zero_state(const LstmModel& m) {
  LstmState s;
  s.h.assign(static_cast<std::size_t>(m.hidden_dim), 0.0);
  s.c.assign(static_cast<std::size_t>(m.hidden_dim), 0.0);
  return s;
}

namespace detail {

/// Everything the backward pass needs from one time step.
struct StepCache {
  std::vector<double> f, i, o, ctil, c, tanh_c;
};

inline void check_finite(std::span<const double> v, const char* gate) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("lstm: ") + gate + " produced a non-finite value");
    }
  }
}

inline double step_core(const LstmModel& m, std::span<const double> x, LstmState& state,
                        StepCache* cache) {
  const std::size_t h_dim = static_cast<std::size_t>(m.hidden_dim);
  std::vector<double> pf(h_dim, 0.0), pi(h_dim, 0.0), po(h_dim, 0.0), pc(h_dim, 0.0);
  if (m.use_bias) {
    pf = m.b_f;
    pi = m.b_i;
    po = m.b_o;
    pc = m.b_c;
  }
  matvec_acc(m.w_f, x, pf);
  matvec_acc(m.u_f, state.h, pf);
  matvec_acc(m.w_i, x, pi);
  matvec_acc(m.u_i, state.h, pi);
  matvec_acc(m.w_o, x, po);
  matvec_acc(m.u_o, state.h, po);
  matvec_acc(m.w_c, x, pc);
  matvec_acc(m.u_c, state.h, pc);

  std::vector<double> f(h_dim), i(h_dim), o(h_dim), ctil(h_dim), tanh_c(h_dim);
  for (std::size_t n = 0; n < h_dim; ++n) {
    f[n] = logistic(pf[n]);
    i[n] = logistic(pi[n]);
    o[n] = logistic(po[n]);
    ctil[n] = m.candidate == CandidateActivation::Tanh ? std::tanh(pc[n]) : logistic(pc[n]);
  }
  check_finite(f, "forget gate");
  check_finite(i, "input gate");
  check_finite(o, "output gate");
  check_finite(ctil, "candidate cell");

  for (std::size_t n = 0; n < h_dim; ++n) {
    state.c[n] = f[n] * state.c[n] + i[n] * ctil[n];
    tanh_c[n] = std::tanh(state.c[n]);
    state.h[n] = o[n] * tanh_c[n];
  }
  check_finite(state.c, "cell state");

  double y = 0.0;
  for (std::size_t n = 0; n < h_dim; ++n) y += m.w_out[n] * state.h[n];
  if (!std::isfinite(y)) throw NumericError("lstm: output is non-finite");

  if (cache) {
    cache->f = std::move(f);
    cache->i = std::move(i);
    cache->o = std::move(o);
    cache->ctil = std::move(ctil);
    cache->c = state.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return y;
}

}  // namespace detail

struct StepResult {
  LstmState state;
  double y = 0.0;
};

inline StepResult forward_step(const LstmModel& m, std::span<const double> x,
                               const LstmState& state) {
  if (x.size() != static_cast<std::size_t>(m.input_dim)) {
    throw ConfigError("lstm: input size " + std::to_string(x.size()) + " != input_dim " +
                      std::to_string(m.input_dim));
  }
  if (state.h.size() != static_cast<std::size_t>(m.hidden_dim) ||
      state.c.size() != static_cast<std::size_t>(m.hidden_dim)) {
    throw ConfigError("lstm: state size mismatch");
  }
  StepResult r;
  r.state = state;
  r.y = detail::step_core(m, x, r.state, nullptr);
  return r;
}

/// Runs the window (lag x k, row-major) through the recurrence from a zero
/// state and returns the final step's prediction.
inline double forward_sequence(const LstmModel& m, std::span<const double> window) {
  const std::size_t k = static_cast<std::size_t>(m.input_dim);
  if (k == 0 || window.size() % k != 0 || window.empty()) {
    throw ConfigError("lstm: window size not a multiple of input_dim");
  }
  const std::size_t lag = window.size() / k;
  LstmState state = zero_state(m);
  double y = 0.0;
  for (std::size_t t = 0; t < lag; ++t) {
    y = detail::step_core(m, window.subspan(t * k, k), state, nullptr);
  }
  return y;
}

struct LossAndGradients {
  double loss = 0.0;
  LstmModel gradients;  // same shapes as the model
};

/// Mean squared error over the batch and its gradient in every weight,
/// by backpropagation through time across the lag steps.
inline LossAndGradients loss_and_gradients(const LstmModel& m, const SupervisedSet& batch) {
  if (batch.size() == 0) throw ConfigError("lstm: empty batch");
  if (batch.k != m.input_dim) throw ConfigError("lstm: batch k != model input_dim");

  const std::size_t h_dim = static_cast<std::size_t>(m.hidden_dim);
  const std::size_t k = static_cast<std::size_t>(m.input_dim);
  const std::size_t batch_n = batch.size();

  LossAndGradients out;
  out.gradients = zero_like(m);
  LstmModel& g = out.gradients;

  std::vector<detail::StepCache> caches;
  for (std::size_t b = 0; b < batch_n; ++b) {
    const std::span<const double> window(batch.inputs[b]);
    const std::size_t lag = window.size() / k;
    caches.assign(lag, {});
    LstmState state = zero_state(m);
    double y = 0.0;
    for (std::size_t t = 0; t < lag; ++t) {
      y = detail::step_core(m, window.subspan(t * k, k), state, &caches[t]);
    }
    const double err = y - batch.targets[b];
    out.loss += err * err;
    const double dy = 2.0 * err / static_cast<double>(batch_n);

    std::vector<double> dh(h_dim, 0.0), dc(h_dim, 0.0);
    for (std::size_t n = 0; n < h_dim; ++n) {
      g.w_out[n] += dy * caches[lag - 1].o[n] * caches[lag - 1].tanh_c[n];
      dh[n] = m.w_out[n] * dy;
    }

    std::vector<double> af(h_dim), ai(h_dim), ao(h_dim), ac(h_dim);
    for (std::size_t t = lag; t-- > 0;) {
      const detail::StepCache& s = caches[t];
      const std::span<const double> x = window.subspan(t * k, k);
      // h_{t-1} = o_{t-1} . tanh(c_{t-1})
      std::vector<double> h_prev_vec(h_dim, 0.0);
      if (t > 0) {
        for (std::size_t n = 0; n < h_dim; ++n) {
          h_prev_vec[n] = caches[t - 1].o[n] * caches[t - 1].tanh_c[n];
        }
      }

      for (std::size_t n = 0; n < h_dim; ++n) {
        const double c_prev = t > 0 ? caches[t - 1].c[n] : 0.0;
        const double tc = s.tanh_c[n];
        const double d_o = dh[n] * tc;
        dc[n] += dh[n] * s.o[n] * (1.0 - tc * tc);
        const double d_ctil = dc[n] * s.i[n];
        const double d_i = dc[n] * s.ctil[n];
        const double d_f = dc[n] * c_prev;
        af[n] = d_f * s.f[n] * (1.0 - s.f[n]);
        ai[n] = d_i * s.i[n] * (1.0 - s.i[n]);
        ao[n] = d_o * s.o[n] * (1.0 - s.o[n]);
        ac[n] = m.candidate == CandidateActivation::Tanh
                    ? d_ctil * (1.0 - s.ctil[n] * s.ctil[n])
                    : d_ctil * s.ctil[n] * (1.0 - s.ctil[n]);
        dc[n] *= s.f[n];  // becomes dc_{t-1}
      }

      detail::outer_acc(g.w_f, af, x);
      detail::outer_acc(g.w_i, ai, x);
      detail::outer_acc(g.w_o, ao, x);
      detail::outer_acc(g.w_c, ac, x);
      if (t > 0) {
        detail::outer_acc(g.u_f, af, h_prev_vec);
        detail::outer_acc(g.u_i, ai, h_prev_vec);
        detail::outer_acc(g.u_o, ao, h_prev_vec);
        detail::outer_acc(g.u_c, ac, h_prev_vec);
      }
      if (m.use_bias) {
        for (std::size_t n = 0; n < h_dim; ++n) {
          g.b_f[n] += af[n];
          g.b_i[n] += ai[n];
          g.b_o[n] += ao[n];
          g.b_c[n] += ac[n];
        }
      }

      std::fill(dh.begin(), dh.end(), 0.0);
      if (t > 0) {
        detail::matvec_transpose_acc(m.u_f, af, dh);
        detail::matvec_transpose_acc(m.u_i, ai, dh);
        detail::matvec_transpose_acc(m.u_o, ao, dh);
        detail::matvec_transpose_acc(m.u_c, ac, dh);
      }
    }
  }
  out.loss /= static_cast<double>(batch_n);
  if (!std::isfinite(out.loss)) throw NumericError("lstm: non-finite loss");
  return out;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 2000;
  int patience = 50;   // epochs of non-improving validation error tolerated
  int batch_size = 0;  // 0 = full batch
  std::uint32_t seed = 1;
  enum class Optimizer { GradientDescent, Adam };
  Optimizer optimizer = Optimizer::Adam;
  int n_runs = 20;  // stochastic ensemble size
  int hidden_dim = 32;
  bool use_bias = false;
  CandidateActivation candidate = CandidateActivation::Tanh;

  void check() const {
    if (learning_rate < 0.0) throw ConfigError("train: negative learning rate");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience < 0 || patience > max_epochs) {
      throw ConfigError("train: patience must be in [0, max_epochs]");
    }
    if (batch_size < 0) throw ConfigError("train: negative batch size");
    if (n_runs < 1) throw ConfigError("train: n_runs must be >= 1");
    if (hidden_dim < 1) throw ConfigError("train: hidden_dim must be >= 1");
  }
};

struct TrainResult {
  LstmModel model;  // best-validation snapshot
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  bool diverged = false;
};

inline double mse_of(const LstmModel& m, const SupervisedSet& set) {
  if (set.size() == 0) throw ConfigError("lstm: empty evaluation set");
  double s = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double e = forward_sequence(m, set.inputs[i]) - set.targets[i];
    s += e * e;
  }
  return s / static_cast<double>(set.size());
}

namespace detail {

struct AdamState {
  LstmModel m1, m2;
  long step = 0;
};

inline void apply_update(LstmModel& model, LstmModel& grads, const TrainConfig& cfg,
                         AdamState& adam) {
  if (cfg.optimizer == TrainConfig::Optimizer::GradientDescent) {
    std::vector<std::vector<double>*> gs;
    grads.for_each_param([&gs](std::vector<double>& v) { gs.push_back(&v); });
    std::size_t idx = 0;
    model.for_each_param([&](std::vector<double>& p) {
      const std::vector<double>& g = *gs[idx++];
      for (std::size_t n = 0; n < p.size(); ++n) p[n] -= cfg.learning_rate * g[n];
    });
    return;
  }

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++adam.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));
  std::vector<std::vector<double>*> gs, m1s, m2s;
  grads.for_each_param([&gs](std::vector<double>& v) { gs.push_back(&v); });
  adam.m1.for_each_param([&m1s](std::vector<double>& v) { m1s.push_back(&v); });
  adam.m2.for_each_param([&m2s](std::vector<double>& v) { m2s.push_back(&v); });
  std::size_t idx = 0;
  model.for_each_param([&](std::vector<double>& p) {
    const std::vector<double>& g = *gs[idx];
    std::vector<double>& m1 = *m1s[idx];
    std::vector<double>& m2 = *m2s[idx];
    ++idx;
    for (std::size_t n = 0; n < p.size(); ++n) {
      m1[n] = beta1 * m1[n] + (1.0 - beta1) * g[n];
      m2[n] = beta2 * m2[n] + (1.0 - beta2) * g[n] * g[n];
      p[n] -= cfg.learning_rate * (m1[n] / c1) / (std::sqrt(m2[n] / c2) + eps);
    }
  });
}

inline SupervisedSet subset_of(const SupervisedSet& s, std::span<const std::size_t> idx) {
  SupervisedSet out;
  out.lag = s.lag;
  out.k = s.k;
  for (std::size_t i : idx) {
    out.inputs.push_back(s.inputs[i]);
    out.targets.push_back(s.targets[i]);
    out.target_years.push_back(s.target_years[i]);
  }
  return out;
}

}  // namespace detail

/// One training run: seeded init (or a warm start), gradient iterations,
/// early stopping on the validation error, best-snapshot restore.
inline TrainResult train(const TrainConfig& cfg, const SupervisedSet& train_set,
                         const SupervisedSet& val_set,
                         const LstmModel* warm_start = nullptr) {
  cfg.check();
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw ConfigError("train: empty training or validation set");
  }
  if (train_set.k != val_set.k) throw ConfigError("train: k mismatch between sets");

  TrainResult r;
  LstmModel model;
  if (warm_start) {
    if (warm_start->input_dim != train_set.k) {
      throw ConfigError("train: warm start input_dim mismatch");
    }
    model = *warm_start;
  } else {
    model = make_model(train_set.k, cfg.hidden_dim, cfg.candidate, cfg.use_bias);
    std::mt19937 rng(cfg.seed);
    init_weights(model, rng);
  }
  r.model = model;

  detail::AdamState adam;
  adam.m1 = zero_like(model);
  adam.m2 = zero_like(model);

  std::mt19937 shuffle_rng(cfg.seed ^ 0x9e3779b9u);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  int stale = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    try {
      if (cfg.batch_size == 0 ||
          cfg.batch_size >= static_cast<int>(train_set.size())) {
        auto lg = loss_and_gradients(model, train_set);
        epoch_loss = lg.loss;
        detail::apply_update(model, lg.gradients, cfg, adam);
      } else {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        std::size_t done = 0;
        std::size_t batches = 0;
        while (done < order.size()) {
          const std::size_t take =
              std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                    order.size() - done);
          const auto batch = detail::subset_of(
              train_set, std::span<const std::size_t>(order).subspan(done, take));
          auto lg = loss_and_gradients(model, batch);
          epoch_loss += lg.loss;
          detail::apply_update(model, lg.gradients, cfg, adam);
          done += take;
          ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
      }

      const double val = mse_of(model, val_set);
      r.train_loss.push_back(epoch_loss);
      r.val_loss.push_back(val);
      if (!std::isfinite(epoch_loss) || !std::isfinite(val)) {
        r.diverged = true;
        break;
      }
      if (val < r.best_val) {
        r.best_val = val;
        r.best_epoch = epoch;
        r.model = model;
        stale = 0;
      } else {
        ++stale;
        if (stale > cfg.patience) break;
      }
    } catch (const NumericError&) {
      r.diverged = true;
      break;
    }
  }
  return r;
}

/// Splits off the last `fraction` of the pairs (at least one) as the early
/// stopping hold-out.
inline std::pair<SupervisedSet, SupervisedSet> split_validation_tail(const SupervisedSet& s,
                                                                     double fraction = 0.1) {
  if (s.size() < 2) throw ConfigError("validation split: need at least 2 pairs");
  std::size_t val_n = static_cast<std::size_t>(
      std::floor(static_cast<double>(s.size()) * fraction));
  val_n = std::max<std::size_t>(val_n, 1);
  val_n = std::min<std::size_t>(val_n, s.size() - 1);
  std::vector<std::size_t> head(s.size() - val_n), tail(val_n);
  for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
  for (std::size_t i = 0; i < tail.size(); ++i) tail[i] = head.size() + i;
  return {detail::subset_of(s, head), detail::subset_of(s, tail)};
}

/// Trains n_runs models with seeds seed+0..seed+n_runs-1. Diverging runs are
/// dropped with a warning; at least half must survive.
inline std::vector<LstmModel> train_ensemble(const TrainConfig& cfg,
                                             const SupervisedSet& train_set,
                                             const SupervisedSet& val_set,
                                             std::vector<std::string>* warnings = nullptr) {
  cfg.check();
  std::vector<std::future<TrainResult>> futures;
  futures.reserve(static_cast<std::size_t>(cfg.n_runs));
  for (int run = 0; run < cfg.n_runs; ++run) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint32_t>(run);
    futures.push_back(std::async(std::launch::async, [run_cfg, &train_set, &val_set]() {
      return train(run_cfg, train_set, val_set);
    }));
  }
  std::vector<LstmModel> models;
  int diverged = 0;
  for (int run = 0; run < cfg.n_runs; ++run) {
    TrainResult r = futures[static_cast<std::size_t>(run)].get();
    if (r.diverged) {
      ++diverged;
      if (warnings) {
        warnings->push_back("ensemble: run " + std::to_string(run) + " (seed " +
                            std::to_string(cfg.seed + static_cast<std::uint32_t>(run)) +
                            ") diverged and was excluded");
      }
      continue;
    }
    models.push_back(std::move(r.model));
  }
  if (models.size() * 2 < static_cast<std::size_t>(cfg.n_runs)) {
    throw NumericError("ensemble: " + std::to_string(diverged) + " of " +
                       std::to_string(cfg.n_runs) + " runs diverged");
  }
  return models;
}

/// Per-window mean prediction across models.
inline std::vector<double> predict_mean(std::span<const LstmModel> models,
                                        const std::vector<std::vector<double>>& windows) {
  if (models.empty()) throw ConfigError("predict: no models");
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    double s = 0.0;
    for (const auto& m : models) s += forward_sequence(m, w);
    out.push_back(s / static_cast<double>(models.size()));
  }
  return out;
}

/// Trains the ensemble (holding out the tail of train_set for stopping)
/// and returns the averaged predictions on the given windows.
inline std::vector<double> ensemble_predict(const TrainConfig& cfg,
                                            const SupervisedSet& train_set,
                                            const std::vector<std::vector<double>>& eval_windows,
                                            std::vector<std::string>* warnings = nullptr) {
  const auto [core, val] = split_validation_tail(train_set);
  const auto models = train_ensemble(cfg, core, val, warnings);
  return predict_mean(models, eval_windows);
}

// ---------------------------------------------------------------------------
// Persistence: versioned little-endian binary layout.
//   bytes 0..7   magic "FCLSTM1\n"
//   u32          version (1)
//   u32          input_dim
//   u32          hidden_dim
//   u8           candidate (0 tanh, 1 logistic)
//   u8           use_bias
//   u16          reserved (0)
//   f64[...]     parameter arrays in for_each_param order
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2];
  for (int i = 0; i < 2; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 2);
}

inline void write_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("model file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw DataError("model file truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline double read_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline void save_model(const LstmModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out.write("FCLSTM1\n", 8);
  detail::write_u32(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(m.input_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(m.hidden_dim));
  out.put(m.candidate == CandidateActivation::Tanh ? '\0' : '\1');
  out.put(m.use_bias ? '\1' : '\0');
  detail::write_u16(out, 0);
  m.for_each_param([&out](const std::vector<double>& p) {
    for (double v : p) detail::write_f64(out, v);
  });
  if (!out) throw DataError("write failed: " + path);
}

inline LstmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "FCLSTM1\n") {
    throw DataError("not a model file: " + path);
  }
  const std::uint32_t version = detail::read_u32(in);
  if (version != 1) {
    throw DataError("unsupported model file version " + std::to_string(version));
  }
  const auto input_dim = static_cast<int>(detail::read_u32(in));
  const auto hidden_dim = static_cast<int>(detail::read_u32(in));
  if (input_dim < 1 || hidden_dim < 1 || input_dim > 1'000'000 || hidden_dim > 1'000'000) {
    throw DataError("model file has implausible dimensions");
  }
  const int cand = in.get();
  const int bias = in.get();
  if (cand < 0 || bias < 0) throw DataError("model file truncated");
  detail::read_u16(in);
  LstmModel m = make_model(input_dim, hidden_dim,
                           cand == 0 ? CandidateActivation::Tanh : CandidateActivation::Sigmoid,
                           bias != 0);
  m.for_each_param([&in](std::vector<double>& p) {
    for (double& v : p) v = detail::read_f64(in);
  });
  // exactly at EOF now
  in.peek();
  if (!in.eof()) throw DataError("model file has trailing bytes");
  return m;
}

/// Human-readable equivalent of the binary file.
inline std::string dump_text(const LstmModel& m) {
  std::ostringstream out;
  out << "lstm input_dim=" << m.input_dim << " hidden_dim=" << m.hidden_dim << " candidate="
      << (m.candidate == CandidateActivation::Tanh ? "tanh" : "sigmoid")
      << " bias=" << (m.use_bias ? "on" : "off") << "\n";
  const char* names[] = {"W_f", "W_i", "W_o", "W_c", "U_f", "U_i",
                         "U_o", "U_c", "W_out", "b_f", "b_i", "b_o", "b_c"};
  std::size_t idx = 0;
  m.for_each_param([&](const std::vector<double>& p) {
    out << names[idx++] << ":";
    for (double v : p) out << ' ' << detail::format_double(v);
    out << "\n";
  });
  return out.str();
}

}  // namespace frontcast

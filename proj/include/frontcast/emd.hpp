#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "frontcast/errors.hpp"
#include "frontcast/mode_matrix.hpp"
#include "frontcast/series.hpp"

namespace frontcast {

struct SiftConfig {
  int max_imfs = 10;
  double sift_sd_threshold = 0.2;  // Cauchy-type stopping criterion
  int max_sift_iterations = 100;
  int ensemble_size = 100;       // EEMD realizations
  double noise_amplitude = 0.2;  // fraction of the signal SD
  std::uint32_t seed = 0;

  void check() const {
    if (max_imfs < 1 || max_sift_iterations < 1 || ensemble_size < 1) {
      throw ConfigError("sift config: counts must be positive");
    }
    if (sift_sd_threshold <= 0.0 || sift_sd_threshold >= 1.0) {
      throw ConfigError("sift config: sd threshold must be in (0,1)");
    }
    if (noise_amplitude < 0.0) throw ConfigError("sift config: negative noise amplitude");
  }
};

namespace detail {

inline std::vector<std::size_t> local_maxima(std::span<const double> x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) idx.push_back(i);
  }
  return idx;
}

inline std::vector<std::size_t> local_minima(std::span<const double> x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] < x[i - 1] && x[i] < x[i + 1]) idx.push_back(i);
  }
  return idx;
}

inline int count_zero_crossings(std::span<const double> x) {
  int count = 0;
  double prev = 0.0;
  bool have_prev = false;
  for (double v : x) {
    if (v == 0.0) continue;  // treat exact zeros as part of the crossing
    if (have_prev && ((prev > 0.0) != (v > 0.0))) ++count;
    prev = v;
    have_prev = true;
  }
  return count;
}

/// |#extrema - #zero crossings| <= 1, the defining IMF property.
inline bool imf_property(std::span<const double> x) {
  const int extrema =
      static_cast<int>(local_maxima(x).size() + local_minima(x).size());
  return std::abs(extrema - count_zero_crossings(x)) <= 1;
}

/// Natural cubic spline through strictly increasing knots, evaluated on the
/// integer grid 0..n-1. Degenerates to linear (2 knots) or constant (1).
inline std::vector<double> spline_on_grid(const std::vector<double>& xs,
                                          const std::vector<double>& ys, std::size_t n) {
  const std::size_t m = xs.size();
  std::vector<double> out(n, 0.0);
  if (m == 0) throw NumericError("spline: no knots");
  if (m == 1) {
    std::fill(out.begin(), out.end(), ys[0]);
    return out;
  }
  if (m == 2) {
    const double slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = ys[0] + slope * (static_cast<double>(i) - xs[0]);
    }
    return out;
  }

  // Second derivatives via the standard tridiagonal system (natural ends).
  std::vector<double> h(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) h[i] = xs[i + 1] - xs[i];
  std::vector<double> diag(m, 0.0), rhs(m, 0.0), upper(m, 0.0);
  diag[0] = 1.0;
  diag[m - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    diag[i] = 2.0 * (h[i - 1] + h[i]);
    upper[i] = h[i];
    rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
  }
  // Thomas algorithm; sub-diagonal of row i is h[i-1].
  std::vector<double> c(m, 0.0), d(m, 0.0);
  c[0] = 0.0;
  d[0] = 0.0;
  for (std::size_t i = 1; i < m; ++i) {
    const double sub = (i + 1 < m) ? h[i - 1] : 0.0;
    const double denom = diag[i] - sub * c[i - 1];
    c[i] = (i + 1 < m) ? upper[i] / denom : 0.0;
    d[i] = (rhs[i] - sub * d[i - 1]) / denom;
  }
  std::vector<double> m2(m, 0.0);  // second derivatives
  m2[m - 1] = d[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) m2[i] = d[i] - c[i] * m2[i + 1];

  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    while (seg + 2 < m && t > xs[seg + 1]) ++seg;
    const double dx = h[seg];
    const double a = (xs[seg + 1] - t) / dx;
    const double b = (t - xs[seg]) / dx;
    out[i] = a * ys[seg] + b * ys[seg + 1] +
             ((a * a * a - a) * m2[seg] + (b * b * b - b) * m2[seg + 1]) * dx * dx / 6.0;
  }
  return out;
}

/// Envelope through the given extrema, with up to two extrema mirrored past
/// each end so the spline does not collapse at the borders.
inline std::vector<double> envelope(std::span<const double> x,
                                    const std::vector<std::size_t>& extrema) {
  const std::size_t n = x.size();
  std::vector<std::pair<double, double>> knots;
  knots.reserve(extrema.size() + 4);
  for (std::size_t idx : extrema) {
    knots.emplace_back(static_cast<double>(idx), x[idx]);
  }
  const std::size_t mirrored = std::min<std::size_t>(extrema.size(), 2);
  for (std::size_t i = 0; i < mirrored; ++i) {
    const double p = static_cast<double>(extrema[i]);
    if (p > 0.0) knots.emplace_back(-p, x[extrema[i]]);
  }
  const double last = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < mirrored; ++i) {
    const std::size_t idx = extrema[extrema.size() - 1 - i];
    const double p = static_cast<double>(idx);
    if (p < last) knots.emplace_back(2.0 * last - p, x[idx]);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              knots.end());
  if (knots.size() < 2) {
    knots.clear();
    knots.emplace_back(0.0, x.front());
    knots.emplace_back(last, x.back());
  }
  std::vector<double> xs, ys;
  xs.reserve(knots.size());
  ys.reserve(knots.size());
  for (const auto& [p, v] : knots) {
    xs.push_back(p);
    ys.push_back(v);
  }
  return spline_on_grid(xs, ys, n);
}

inline std::vector<double> sift(std::span<const double> signal, const SiftConfig& cfg) {
  std::vector<double> h(signal.begin(), signal.end());
  for (int iter = 0; iter < cfg.max_sift_iterations; ++iter) {
    const auto maxima = local_maxima(h);
    const auto minima = local_minima(h);
    if (maxima.empty() || minima.empty()) break;
    const auto upper = envelope(h, maxima);
    const auto lower = envelope(h, minima);
    double sd = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double em = 0.5 * (upper[i] + lower[i]);
      sd += em * em / (h[i] * h[i] + 1e-12);
      h[i] -= em;
    }
    if (sd < cfg.sift_sd_threshold && imf_property(h)) break;
  }
  return h;
}

}  // namespace detail

/// Empirical mode decomposition: iterative sifting produces IMFs until the
/// residue has fewer than two interior extrema or max_imfs is reached. Modes
/// are ordered IMF1..IMFn (fast to slow) with the residue last.
inline ModeMatrix emd(std::span<const double> signal, const SiftConfig& cfg = {}) {
  cfg.check();
  if (signal.size() < 8) throw ConfigError("emd: signal length must be >= 8");
  for (double v : signal) {
    if (!std::isfinite(v)) throw DataError("emd: non-finite sample");
  }

  double scale = 0.0;
  for (double v : signal) scale = std::max(scale, std::abs(v));

  std::vector<double> residue(signal.begin(), signal.end());
  std::vector<std::vector<double>> imfs;
  while (static_cast<int>(imfs.size()) < cfg.max_imfs) {
    const auto maxima = detail::local_maxima(residue);
    const auto minima = detail::local_minima(residue);
    if (maxima.empty() || minima.empty() || maxima.size() + minima.size() < 2) break;
    auto imf = detail::sift(residue, cfg);
    double imf_peak = 0.0;
    for (double v : imf) imf_peak = std::max(imf_peak, std::abs(v));
    if (imf_peak <= 1e-12 * std::max(scale, 1.0)) break;  // sifting stalled
    for (std::size_t i = 0; i < residue.size(); ++i) residue[i] -= imf[i];
    imfs.push_back(std::move(imf));
  }

  ModeMatrix out;
  out.start_year = 0;
  out.end_year = static_cast<int>(signal.size()) - 1;
  for (std::size_t i = 0; i < imfs.size(); ++i) {
    out.labels.push_back("IMF" + std::to_string(i + 1));
  }
  out.labels.emplace_back("residue");
  out.modes = std::move(imfs);
  out.modes.push_back(std::move(residue));
  return out;
}

inline ModeMatrix emd(const TimeSeries& ts, const SiftConfig& cfg = {}) {
  validate(ts);
  auto out = emd(std::span<const double>(ts.values), cfg);
  out.start_year = ts.start_year;
  out.end_year = ts.end_year();
  return out;
}

/// Ensemble EMD: averages decompositions of noise-perturbed copies. Noise is
/// added in complementary +/- pairs so the noise sums to zero exactly and the
/// averaged modes still reconstruct the input. IMFs are aligned by index and
/// zero-padded up to the largest realization; residues are aligned last.
inline ModeMatrix eemd(std::span<const double> signal, const SiftConfig& cfg = {}) {
  cfg.check();
  if (cfg.ensemble_size < 2) throw ConfigError("eemd: ensemble_size must be >= 2");
  if (cfg.noise_amplitude == 0.0) return emd(signal, cfg);
  if (signal.size() < 8) throw ConfigError("eemd: signal length must be >= 8");

  const double noise_sd = cfg.noise_amplitude * population_sd(signal);
  std::mt19937 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, noise_sd);

  const std::size_t n = signal.size();
  std::vector<std::vector<double>> imf_sums;
  std::vector<double> residue_sum(n, 0.0);
  std::size_t realizations = 0;

  auto accumulate = [&](const ModeMatrix& dec) {
    const std::size_t imf_count = dec.modes.size() - 1;
    while (imf_sums.size() < imf_count) imf_sums.emplace_back(n, 0.0);
    for (std::size_t j = 0; j < imf_count; ++j) {
      for (std::size_t i = 0; i < n; ++i) imf_sums[j][i] += dec.modes[j][i];
    }
    for (std::size_t i = 0; i < n; ++i) residue_sum[i] += dec.modes.back()[i];
    ++realizations;
  };

  std::vector<double> noisy(n);
  std::vector<double> noise(n);
  const int pairs = cfg.ensemble_size / 2;
  for (int p = 0; p < pairs; ++p) {
    for (std::size_t i = 0; i < n; ++i) noise[i] = normal(rng);
    for (std::size_t i = 0; i < n; ++i) noisy[i] = signal[i] + noise[i];
    accumulate(emd(noisy, cfg));
    for (std::size_t i = 0; i < n; ++i) noisy[i] = signal[i] - noise[i];
    accumulate(emd(noisy, cfg));
  }
  if (cfg.ensemble_size % 2 != 0) {
    accumulate(emd(signal, cfg));
  }

  ModeMatrix out;
  out.start_year = 0;
  out.end_year = static_cast<int>(n) - 1;
  const double inv = 1.0 / static_cast<double>(realizations);
  for (std::size_t j = 0; j < imf_sums.size(); ++j) {
    out.labels.push_back("IMF" + std::to_string(j + 1));
    auto& mode = imf_sums[j];
    for (double& v : mode) v *= inv;
    out.modes.push_back(std::move(mode));
  }
  out.labels.emplace_back("residue");
  for (double& v : residue_sum) v *= inv;
  out.modes.push_back(std::move(residue_sum));
  return out;
}

inline ModeMatrix eemd(const TimeSeries& ts, const SiftConfig& cfg = {}) {
  validate(ts);
  auto out = eemd(std::span<const double>(ts.values), cfg);
  out.start_year = ts.start_year;
  out.end_year = ts.end_year();
  return out;
}

}  // namespace frontcast

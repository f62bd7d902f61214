#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "frontcast/errors.hpp"
#include "frontcast/fft.hpp"
#include "frontcast/mode_matrix.hpp"
#include "frontcast/series.hpp"

namespace frontcast {

struct EwtConfig {
  int n_modes = 9;
  double gamma = 0.2;  // transition half-width as a fraction of the boundary
  bool mirror_extend = true;
  // Boundary detection samples the signal's DTFT on this fixed fine grid
  // regardless of the signal length. Short warmup spans (tens of samples)
  // need the extra resolution to expose enough spectral maxima for k around
  // 9, and keeping the grid identical across prefix lengths keeps detected
  // boundaries stable as a progressive decomposition grows.
  std::size_t boundary_spectrum = 4096;
};

struct BoundaryDetection {
  std::vector<double> boundaries;  // ascending, normalized to (0, pi)
  int modes_found = 0;
  bool reduced = false;  // fewer local maxima than requested modes
};

/// Localmax segmentation: the n_modes largest interior local maxima of the
/// magnitude spectrum are retained (ties keep the lower frequency) and each
/// boundary is the midpoint between consecutive retained maxima. Bin j of an
/// M-bin spectrum sits at omega = pi * j / (M - 1). When fewer maxima exist
/// than requested, the mode count is reduced instead of failing. Maxima
/// below 1e-10 of the spectrum peak are rounding dust, not structure, and
/// are ignored.
inline BoundaryDetection detect_boundaries(std::span<const double> spectrum, int n_modes) {
  if (n_modes < 1) throw ConfigError("boundary detection: n_modes must be >= 1");
  if (spectrum.size() < 4) throw ConfigError("boundary detection: spectrum too short");

  BoundaryDetection out;
  if (n_modes == 1) {
    out.modes_found = 1;
    return out;
  }

  double top = 0.0;
  for (double v : spectrum) top = std::max(top, v);
  const double floor = 1e-10 * top;

  struct Peak {
    double mag;
    std::size_t bin;
  };
  std::vector<Peak> peaks;
  for (std::size_t j = 1; j + 1 < spectrum.size(); ++j) {
    if (spectrum[j] > spectrum[j - 1] && spectrum[j] > spectrum[j + 1] &&
        spectrum[j] > floor) {
      peaks.push_back({spectrum[j], j});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.mag != b.mag) return a.mag > b.mag;
    return a.bin < b.bin;
  });

  const int found = std::min<int>(n_modes, static_cast<int>(peaks.size()));
  if (found <= 1) {
    out.modes_found = 1;
    out.reduced = true;
    return out;
  }
  peaks.resize(static_cast<std::size_t>(found));
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.bin < b.bin; });

  const double grid = std::numbers::pi / static_cast<double>(spectrum.size() - 1);
  for (int i = 0; i + 1 < found; ++i) {
    out.boundaries.push_back(grid * 0.5 *
                             static_cast<double>(peaks[i].bin + peaks[i + 1].bin));
  }
  out.modes_found = found;
  out.reduced = found < n_modes;
  return out;
}

/// Frequency responses of the empirical wavelet filterbank in the
/// partition-of-unity convention: the filter values (not their squares) sum
/// to one at every bin, which makes the additive reconstruction exact.
struct Filterbank {
  std::vector<double> boundaries;
  double gamma = 0.0;  // effective value after any automatic shrink
  bool gamma_shrunk = false;
  std::size_t signal_length = 0;
  std::vector<std::vector<double>> filters;  // k x (signal_length/2 + 1)
};

namespace detail {

/// Meyer transition polynomial: beta(0) = 0, beta(1) = 1, C^3 at both ends.
inline double meyer_beta(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * x * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
}

/// 0 below the transition band around `edge`, 1 above, beta in between.
inline double rising_edge(double omega, double edge, double tau) {
  if (tau <= 0.0) return omega >= edge ? 1.0 : 0.0;
  return meyer_beta((omega - (edge - tau)) / (2.0 * tau));
}

}  // namespace detail

/// Builds one low-pass filter plus band/high-pass filters for the given
/// boundaries on the FFT grid of a length-`signal_length` signal (bin j at
/// omega = 2*pi*j/signal_length). Transition half-widths are gamma*boundary;
/// gamma is shrunk automatically when adjacent transitions would overlap.
inline Filterbank build_filterbank(const std::vector<double>& boundaries,
                                   std::size_t signal_length, double gamma) {
  if (signal_length < 2) throw ConfigError("filterbank: signal length must be >= 2");
  if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("filterbank: gamma must be in (0,1)");
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (boundaries[i] <= 0.0 || boundaries[i] >= std::numbers::pi) {
      throw ConfigError("filterbank: boundaries must lie in (0, pi)");
    }
    if (i > 0 && boundaries[i] <= boundaries[i - 1]) {
      throw ConfigError("filterbank: boundaries must be strictly increasing");
    }
  }

  Filterbank fb;
  fb.boundaries = boundaries;
  fb.signal_length = signal_length;

  double gamma_max = 1.0;
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    gamma_max = std::min(gamma_max, (boundaries[i + 1] - boundaries[i]) /
                                        (boundaries[i + 1] + boundaries[i]));
  }
  if (!boundaries.empty()) {
    gamma_max = std::min(gamma_max, (std::numbers::pi - boundaries.back()) /
                                        (std::numbers::pi + boundaries.back()));
  }
  if (gamma >= gamma_max) {
    fb.gamma = gamma_max * (1.0 - 1e-9);
    fb.gamma_shrunk = true;
  } else {
    fb.gamma = gamma;
  }

  const std::size_t bins = signal_length / 2 + 1;
  const std::size_t k = boundaries.size() + 1;
  fb.filters.assign(k, std::vector<double>(bins, 0.0));
  for (std::size_t j = 0; j < bins; ++j) {
    const double omega =
        2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(signal_length);
    for (std::size_t band = 0; band < k; ++band) {
      double v = 1.0;
      if (band > 0) {
        const double a = boundaries[band - 1];
        v *= detail::rising_edge(omega, a, fb.gamma * a);
      }
      if (band + 1 < k) {
        const double b = boundaries[band];
        v *= 1.0 - detail::rising_edge(omega, b, fb.gamma * b);
      }
      fb.filters[band][j] = v;
    }
  }
  return fb;
}

/// Worst-case deviation of the bin-wise filter sum from one.
inline double completeness_error(const Filterbank& fb) {
  if (fb.filters.empty()) return 1.0;
  double worst = 0.0;
  for (std::size_t j = 0; j < fb.filters.front().size(); ++j) {
    double s = 0.0;
    for (const auto& f : fb.filters) s += f[j];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

struct EwtDecomposition {
  ModeMatrix modes;
  std::vector<double> boundaries;
  double gamma = 0.0;
  int requested_modes = 0;
  bool mode_count_reduced = false;
};

namespace detail {

inline std::vector<std::string> ewt_labels(std::size_t k) {
  std::vector<std::string> labels;
  labels.reserve(k);
  labels.emplace_back("residue");
  for (std::size_t i = 1; i < k; ++i) labels.push_back("WL" + std::to_string(i));
  return labels;
}

inline std::vector<double> mirror_extended(std::span<const double> x) {
  std::vector<double> ext;
  ext.reserve(2 * x.size());
  ext.assign(x.begin(), x.end());
  ext.insert(ext.end(), x.rbegin(), x.rend());
  return ext;
}

struct FilterOutput {
  ModeMatrix modes;
  double gamma = 0.0;
  bool gamma_shrunk = false;
};

inline FilterOutput filter_signal(std::span<const double> signal,
                                  const std::vector<double>& boundaries, double gamma,
                                  bool mirror_extend) {
  const std::vector<double> work =
      mirror_extend ? mirror_extended(signal) : std::vector<double>(signal.begin(), signal.end());
  const Filterbank fb = build_filterbank(boundaries, work.size(), gamma);
  RealFft fft(work.size());
  const auto spectrum = fft.forward(work);

  FilterOutput out;
  out.gamma = fb.gamma;
  out.gamma_shrunk = fb.gamma_shrunk;
  out.modes.start_year = 0;
  out.modes.end_year = static_cast<int>(signal.size()) - 1;
  out.modes.modes.reserve(fb.filters.size());
  std::vector<std::complex<double>> banded(spectrum.size());
  for (const auto& filter : fb.filters) {
    for (std::size_t j = 0; j < spectrum.size(); ++j) banded[j] = spectrum[j] * filter[j];
    auto mode = fft.inverse(banded);
    mode.resize(signal.size());
    out.modes.modes.push_back(std::move(mode));
  }
  out.modes.labels = ewt_labels(out.modes.modes.size());
  return out;
}

}  // namespace detail

/// Decomposes with externally supplied boundaries (no detection step).
inline ModeMatrix ewt_with_boundaries(std::span<const double> signal,
                                      const std::vector<double>& boundaries, double gamma,
                                      bool mirror_extend = true) {
  if (signal.size() < 2) throw ConfigError("ewt: signal too short");
  return detail::filter_signal(signal, boundaries, gamma, mirror_extend).modes;
}

/// Empirical wavelet decomposition into cfg.n_modes series. Band 0 (the
/// low-pass scaling output) is labelled `residue`, the remaining bands
/// WL1..WL{k-1} in order of increasing frequency. When the spectrum offers
/// fewer local maxima than requested the mode count is reduced and the
/// result flags it.
inline EwtDecomposition ewt_decompose(std::span<const double> signal, const EwtConfig& cfg) {
  if (cfg.n_modes < 1) throw ConfigError("ewt: n_modes must be >= 1");
  if (signal.size() < 2 * static_cast<std::size_t>(cfg.n_modes)) {
    throw ConfigError("ewt: signal length " + std::to_string(signal.size()) +
                      " too short for " + std::to_string(cfg.n_modes) +
                      " modes (need >= 2*n_modes)");
  }
  for (double v : signal) {
    if (!std::isfinite(v)) throw DataError("ewt: non-finite sample");
  }

  // The detection spectrum is computed from the demeaned signal: on a fine
  // DTFT grid the window-sidelobe skirt of the DC component would otherwise
  // outrank every genuine spectral peak. Filtering below still runs on the
  // raw signal, so the mean stays in the low-pass residue.
  const std::size_t res = std::max<std::size_t>(cfg.boundary_spectrum, signal.size());
  std::vector<double> centered(signal.begin(), signal.end());
  const double mean = mean_of(centered);
  for (double& v : centered) v -= mean;
  const auto spectrum = magnitude_spectrum(centered, res);
  const auto detection = detect_boundaries(spectrum, cfg.n_modes);

  auto filtered =
      detail::filter_signal(signal, detection.boundaries, cfg.gamma, cfg.mirror_extend);
  EwtDecomposition out;
  out.boundaries = detection.boundaries;
  out.requested_modes = cfg.n_modes;
  out.mode_count_reduced = detection.reduced;
  out.modes = std::move(filtered.modes);
  out.gamma = filtered.gamma;
  return out;
}

inline EwtDecomposition ewt_decompose(const TimeSeries& ts, const EwtConfig& cfg) {
  validate(ts);
  auto out = ewt_decompose(std::span<const double>(ts.values), cfg);
  out.modes.start_year = ts.start_year;
  out.modes.end_year = ts.end_year();
  return out;
}

}  // namespace frontcast

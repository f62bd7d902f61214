#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "frontcast/errors.hpp"
#include "frontcast/series.hpp"

namespace frontcast {

/// One decomposition of a signal over a year range: k component series whose
/// pointwise sum reproduces the input.
struct ModeMatrix {
  int start_year = 0;
  int end_year = 0;
  std::vector<std::vector<double>> modes;  // k series, equal lengths
  std::vector<std::string> labels;         // k names

  std::size_t mode_count() const { return modes.size(); }
  std::size_t length() const { return modes.empty() ? 0 : modes.front().size(); }

  std::vector<double> reconstruct() const {
    std::vector<double> sum(length(), 0.0);
    for (const auto& m : modes) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m[i];
    }
    return sum;
  }
};

/// Population SD per mode plus the SD of the reconstructed signal.
struct SdProfile {
  std::vector<std::string> labels;
  std::vector<double> mode_sd;
  double reconstructed_sd = 0.0;
};

inline SdProfile mode_sd_profile(const ModeMatrix& m) {
  if (m.modes.empty()) throw ConfigError("sd profile: empty mode matrix");
  SdProfile p;
  p.labels = m.labels;
  p.mode_sd.reserve(m.modes.size());
  for (const auto& mode : m.modes) p.mode_sd.push_back(population_sd(mode));
  p.reconstructed_sd = population_sd(m.reconstruct());
  return p;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV layout: `year,<label>,<label>,...`, one row per year, full double
/// precision. This is also the import format for externally computed IMFs.
inline void save_mode_csv(const ModeMatrix& m, const std::string& path) {
  if (m.modes.empty()) throw ConfigError("save: empty mode matrix");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "year";
  for (const auto& l : m.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < m.length(); ++i) {
    out << (m.start_year + static_cast<int>(i));
    for (const auto& mode : m.modes) out << ',' << detail::format_double(mode[i]);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

inline ModeMatrix load_mode_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  std::size_t line_no = 0;
  ModeMatrix m;
  bool header_seen = false;
  int prev_year = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::strip(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (!header_seen) {
      if (cells.size() < 2 || detail::strip(cells[0]) != "year") {
        throw DataError("row " + std::to_string(line_no) +
                        ": expected header 'year,<mode labels...>'");
      }
      for (std::size_t j = 1; j < cells.size(); ++j) {
        m.labels.push_back(detail::strip(cells[j]));
      }
      m.modes.assign(m.labels.size(), {});
      header_seen = true;
      continue;
    }
    if (cells.size() != m.labels.size() + 1) {
      throw DataError("row " + std::to_string(line_no) + ": expected " +
                      std::to_string(m.labels.size() + 1) + " columns");
    }
    int year = 0;
    if (!detail::parse_int(cells[0], year)) {
      throw DataError("row " + std::to_string(line_no) + ": non-numeric year");
    }
    if (m.modes.front().empty()) {
      m.start_year = year;
    } else if (year != prev_year + 1) {
      throw DataError("row " + std::to_string(line_no) + ": years not consecutive");
    }
    prev_year = year;
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      double v = 0.0;
      if (!detail::parse_double(cells[j + 1], v)) {
        throw DataError("row " + std::to_string(line_no) + ": non-numeric cell '" +
                        detail::strip(cells[j + 1]) + "'");
      }
      m.modes[j].push_back(v);
    }
  }
  if (!header_seen || m.modes.empty() || m.modes.front().empty()) {
    throw DataError("no data rows in " + path);
  }
  m.end_year = prev_year;
  return m;
}

/// Largest relative pointwise deviation between the mode sum and the signal.
inline double reconstruction_error(const ModeMatrix& m, std::span<const double> signal) {
  if (signal.size() != m.length()) throw ConfigError("reconstruction: length mismatch");
  const auto sum = m.reconstruct();
  double scale = 0.0;
  for (double v : signal) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    worst = std::max(worst, std::abs(sum[i] - signal[i]) / scale);
  }
  return worst;
}

}  // namespace frontcast

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "frontcast/emd.hpp"
#include "frontcast/errors.hpp"
#include "frontcast/ewt.hpp"
#include "frontcast/mode_matrix.hpp"
#include "frontcast/series.hpp"

namespace frontcast {

/// Which decomposition runs at each front, plus its parameters. The column
/// count k of the endpoint matrix is fixed by this choice: for EWT it is
/// n_modes (hard requirement, fronts may not reduce it); for the EMD family
/// it is max_imfs + 1, with missing IMFs zero-padded so every front yields
/// the same row shape.
struct DecomposerConfig {
  enum class Kind { Ewt, Emd, Eemd };
  Kind kind = Kind::Ewt;
  EwtConfig ewt;
  SiftConfig sift;

  int mode_count() const {
    return kind == Kind::Ewt ? ewt.n_modes : sift.max_imfs + 1;
  }

  std::size_t min_signal_length() const {
    return kind == Kind::Ewt ? 2 * static_cast<std::size_t>(ewt.n_modes) : 8;
  }

  std::string id() const {
    switch (kind) {
      case Kind::Ewt: return "ewt";
      case Kind::Emd: return "emd";
      case Kind::Eemd: return "eemd";
    }
    return "?";
  }

  static Kind kind_from_string(const std::string& s) {
    if (s == "ewt") return Kind::Ewt;
    if (s == "emd") return Kind::Emd;
    if (s == "eemd") return Kind::Eemd;
    throw ConfigError("unknown decomposer '" + s + "' (expected ewt, emd or eemd)");
  }
};

inline void to_json(nlohmann::json& j, const EwtConfig& c) {
  j = {{"n_modes", c.n_modes},
       {"gamma", c.gamma},
       {"mirror_extend", c.mirror_extend},
       {"boundary_spectrum", c.boundary_spectrum}};
}

inline void from_json(const nlohmann::json& j, EwtConfig& c) {
  c.n_modes = j.value("n_modes", c.n_modes);
  c.gamma = j.value("gamma", c.gamma);
  c.mirror_extend = j.value("mirror_extend", c.mirror_extend);
  c.boundary_spectrum = j.value("boundary_spectrum", c.boundary_spectrum);
}

inline void to_json(nlohmann::json& j, const SiftConfig& c) {
  j = {{"max_imfs", c.max_imfs},
       {"sift_sd_threshold", c.sift_sd_threshold},
       {"max_sift_iterations", c.max_sift_iterations},
       {"ensemble_size", c.ensemble_size},
       {"noise_amplitude", c.noise_amplitude},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SiftConfig& c) {
  c.max_imfs = j.value("max_imfs", c.max_imfs);
  c.sift_sd_threshold = j.value("sift_sd_threshold", c.sift_sd_threshold);
  c.max_sift_iterations = j.value("max_sift_iterations", c.max_sift_iterations);
  c.ensemble_size = j.value("ensemble_size", c.ensemble_size);
  c.noise_amplitude = j.value("noise_amplitude", c.noise_amplitude);
  c.seed = j.value("seed", c.seed);
}

inline void to_json(nlohmann::json& j, const DecomposerConfig& c) {
  j = {{"kind", c.id()}, {"ewt", c.ewt}, {"sift", c.sift}};
}

inline void from_json(const nlohmann::json& j, DecomposerConfig& c) {
  if (j.contains("kind")) c.kind = DecomposerConfig::kind_from_string(j.at("kind"));
  if (j.contains("ewt")) j.at("ewt").get_to(c.ewt);
  if (j.contains("sift")) j.at("sift").get_to(c.sift);
}

/// The leak-free record of progressive decomposition: row y holds the final
/// (front) coefficients of the decomposition of the series up to year y, and
/// nothing else. Appending data can only append rows; existing rows never
/// change, so columns behave like ordinary time series with no information
/// from the future.
struct EndpointMatrix {
  int warmup_year = 0;  // first front
  int end_year = 0;     // last front
  int k = 0;
  std::vector<std::vector<double>> rows;  // one k-vector per front year
  std::vector<double> targets;            // observed value of the front year
  std::string decomposer_id;
  std::vector<std::string> mode_labels;
  TimeSeries source;  // full input series; lets extend() verify history
  DecomposerConfig config;

  std::size_t row_count() const { return rows.size(); }
  int year_of_row(std::size_t i) const { return warmup_year + static_cast<int>(i); }

  std::size_t row_index(int year) const {
    if (year < warmup_year || year > end_year) {
      throw DataError("endpoint matrix: year " + std::to_string(year) + " outside " +
                      std::to_string(warmup_year) + ".." + std::to_string(end_year));
    }
    return static_cast<std::size_t>(year - warmup_year);
  }
};

namespace detail {

struct FrontRow {
  std::vector<double> values;
  std::vector<std::string> labels;
};

inline FrontRow decompose_front(const TimeSeries& prefix, const DecomposerConfig& cfg) {
  FrontRow out;
  const int k = cfg.mode_count();
  if (cfg.kind == DecomposerConfig::Kind::Ewt) {
    const auto dec = ewt_decompose(prefix, cfg.ewt);
    if (dec.mode_count_reduced) {
      throw NumericError(
          "moving front: decomposition through year " + std::to_string(prefix.end_year()) +
          " found only " + std::to_string(dec.modes.mode_count()) + " of " +
          std::to_string(k) + " modes; raise the warmup length or lower the mode count");
    }
    out.labels = dec.modes.labels;
    out.values.reserve(dec.modes.mode_count());
    for (const auto& mode : dec.modes.modes) out.values.push_back(mode.back());
    return out;
  }

  const ModeMatrix dec = cfg.kind == DecomposerConfig::Kind::Emd ? emd(prefix, cfg.sift)
                                                                 : eemd(prefix, cfg.sift);
  const int imf_count = static_cast<int>(dec.modes.size()) - 1;
  out.values.assign(static_cast<std::size_t>(k), 0.0);
  for (int l = 0; l < std::min(imf_count, k - 1); ++l) {
    out.values[static_cast<std::size_t>(l)] = dec.modes[static_cast<std::size_t>(l)].back();
  }
  out.values[static_cast<std::size_t>(k - 1)] = dec.modes.back().back();
  for (int l = 0; l < k - 1; ++l) out.labels.push_back("IMF" + std::to_string(l + 1));
  out.labels.emplace_back("residue");
  return out;
}

inline void check_row_sum(std::span<const double> row, double target, int year) {
  double sum = 0.0;
  for (double v : row) sum += v;
  if (std::abs(sum - target) > 1e-6 * (std::abs(target) + 1e-9)) {
    throw NumericError("moving front: row for year " + std::to_string(year) +
                       " does not reconstruct the observation (sum " + std::to_string(sum) +
                       " vs " + std::to_string(target) + ")");
  }
}

}  // namespace detail

/// Builds the endpoint matrix: for every front year y from warmup_year to
/// the end of the series, decompose the prefix ending at y and record only
/// the final row, paired with the observed value of year y.
inline EndpointMatrix build_endpoint_matrix(const TimeSeries& ts, int warmup_year,
                                            const DecomposerConfig& cfg) {
  validate(ts);
  if (!ts.covers(warmup_year)) {
    throw ConfigError("warmup year " + std::to_string(warmup_year) + " outside series range");
  }
  const std::size_t warmup_span = static_cast<std::size_t>(warmup_year - ts.start_year) + 1;
  if (warmup_span < cfg.min_signal_length()) {
    throw ConfigError("warmup span of " + std::to_string(warmup_span) +
                      " samples is too short for this decomposer (need >= " +
                      std::to_string(cfg.min_signal_length()) + ")");
  }

  EndpointMatrix e;
  e.warmup_year = warmup_year;
  e.end_year = ts.end_year();
  e.k = cfg.mode_count();
  e.decomposer_id = cfg.id();
  e.config = cfg;
  e.source = ts;
  e.rows.reserve(static_cast<std::size_t>(e.end_year - warmup_year + 1));

  for (int y = warmup_year; y <= e.end_year; ++y) {
    auto front = detail::decompose_front(ts.prefix_until(y), cfg);
    if (e.mode_labels.empty()) e.mode_labels = front.labels;
    const double target = ts.at_year(y);
    detail::check_row_sum(front.values, target, y);
    e.rows.push_back(std::move(front.values));
    e.targets.push_back(target);
  }
  return e;
}

/// Appends rows for newly observed years. Historical values must match the
/// original series bit for bit; existing rows are returned untouched.
inline EndpointMatrix extend_endpoint_matrix(const EndpointMatrix& e,
                                             const TimeSeries& ts_extended) {
  validate(ts_extended);
  if (ts_extended.start_year != e.source.start_year) {
    throw DataError("extend: start year differs from the original series");
  }
  if (ts_extended.size() < e.source.size()) {
    throw DataError("extend: series is shorter than the original");
  }
  for (std::size_t i = 0; i < e.source.values.size(); ++i) {
    if (ts_extended.values[i] != e.source.values[i]) {
      throw DataError("extend: history is immutable, value for year " +
                      std::to_string(e.source.start_year + static_cast<int>(i)) +
                      " differs from the original");
    }
  }

  EndpointMatrix out = e;
  out.source = ts_extended;
  out.end_year = ts_extended.end_year();
  for (int y = e.end_year + 1; y <= out.end_year; ++y) {
    auto front = detail::decompose_front(ts_extended.prefix_until(y), e.config);
    const double target = ts_extended.at_year(y);
    detail::check_row_sum(front.values, target, y);
    out.rows.push_back(std::move(front.values));
    out.targets.push_back(target);
  }
  return out;
}

/// The data-leak demonstrator: decomposing [y1..m] and [y1..m+1] and diffing
/// one component over the shared years. A one-time decomposition would make
/// those coefficients "constant history", yet they change.
struct LeakReport {
  int component_index = 0;
  std::string component_label;
  int first_year = 0;
  int last_year = 0;  // = m; the compared range
  std::vector<double> change_per_year;
  double max_change = 0.0;
  int num_changed = 0;
  double tolerance = 0.0;
};

inline LeakReport leak_demo(const TimeSeries& ts, int front_year, int component_index,
                            const DecomposerConfig& cfg, double tolerance = 1e-9) {
  validate(ts);
  if (!ts.covers(front_year) || !ts.covers(front_year + 1)) {
    throw ConfigError("leak demo: need both year " + std::to_string(front_year) + " and " +
                      std::to_string(front_year + 1) + " inside the series");
  }
  const std::size_t span = static_cast<std::size_t>(front_year - ts.start_year) + 1;
  if (span < cfg.min_signal_length()) {
    throw ConfigError("leak demo: span through the front year is too short to decompose");
  }

  auto decompose = [&cfg](const TimeSeries& prefix) -> ModeMatrix {
    switch (cfg.kind) {
      case DecomposerConfig::Kind::Ewt: return ewt_decompose(prefix, cfg.ewt).modes;
      case DecomposerConfig::Kind::Emd: return emd(prefix, cfg.sift);
      case DecomposerConfig::Kind::Eemd: return eemd(prefix, cfg.sift);
    }
    throw ConfigError("leak demo: unknown decomposer");
  };

  const ModeMatrix a = decompose(ts.prefix_until(front_year));
  const ModeMatrix b = decompose(ts.prefix_until(front_year + 1));
  const std::size_t common = std::min(a.mode_count(), b.mode_count());
  if (component_index < 0 || static_cast<std::size_t>(component_index) >= common) {
    throw ConfigError("leak demo: component index " + std::to_string(component_index) +
                      " out of range (have " + std::to_string(common) + " comparable modes)");
  }

  LeakReport r;
  r.component_index = component_index;
  r.component_label = a.labels[static_cast<std::size_t>(component_index)];
  r.first_year = ts.start_year;
  r.last_year = front_year;
  r.tolerance = tolerance;
  const auto& ma = a.modes[static_cast<std::size_t>(component_index)];
  const auto& mb = b.modes[static_cast<std::size_t>(component_index)];
  r.change_per_year.reserve(ma.size());
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double d = std::abs(ma[i] - mb[i]);
    r.change_per_year.push_back(d);
    r.max_change = std::max(r.max_change, d);
    if (d > tolerance) ++r.num_changed;
  }
  return r;
}

/// CSV layout `year,c1..ck,target` plus a `<path>.meta.json` sidecar holding
/// the decomposer configuration and the source series, so a persisted matrix
/// can be reloaded, validated and extended reproducibly.
inline void save_endpoint_csv(const EndpointMatrix& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "year";
  for (int l = 1; l <= e.k; ++l) out << ",c" << l;
  out << ",target\n";
  for (std::size_t i = 0; i < e.rows.size(); ++i) {
    out << e.year_of_row(i);
    for (double v : e.rows[i]) out << ',' << detail::format_double(v);
    out << ',' << detail::format_double(e.targets[i]) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);

  nlohmann::json meta = {
      {"format", "frontcast-endpoint-matrix"},
      {"version", 1},
      {"decomposer", e.decomposer_id},
      {"k", e.k},
      {"warmup_year", e.warmup_year},
      {"end_year", e.end_year},
      {"mode_labels", e.mode_labels},
      {"config", e.config},
      {"source", {{"start_year", e.source.start_year}, {"values", e.source.values}}},
  };
  std::ofstream meta_out(path + ".meta.json");
  if (!meta_out) throw DataError("cannot write file: " + path + ".meta.json");
  meta_out << meta.dump(2) << '\n';
}

inline EndpointMatrix load_endpoint_csv(const std::string& path) {
  std::ifstream meta_in(path + ".meta.json");
  if (!meta_in) throw DataError("cannot open sidecar: " + path + ".meta.json");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("sidecar parse error: " + std::string(ex.what()));
  }
  if (meta.value("format", "") != "frontcast-endpoint-matrix" || meta.value("version", 0) != 1) {
    throw DataError("sidecar: unsupported format or version");
  }

  EndpointMatrix e;
  e.decomposer_id = meta.at("decomposer").get<std::string>();
  e.k = meta.at("k").get<int>();
  e.warmup_year = meta.at("warmup_year").get<int>();
  e.end_year = meta.at("end_year").get<int>();
  e.mode_labels = meta.at("mode_labels").get<std::vector<std::string>>();
  meta.at("config").get_to(e.config);
  e.source.start_year = meta.at("source").at("start_year").get<int>();
  e.source.values = meta.at("source").at("values").get<std::vector<double>>();

  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::strip(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    if (cells.size() != static_cast<std::size_t>(e.k) + 2) {
      throw DataError("row " + std::to_string(line_no) + ": expected " +
                      std::to_string(e.k + 2) + " columns");
    }
    int year = 0;
    if (!detail::parse_int(cells[0], year)) {
      throw DataError("row " + std::to_string(line_no) + ": non-numeric year");
    }
    std::vector<double> row(static_cast<std::size_t>(e.k));
    for (int l = 0; l < e.k; ++l) {
      if (!detail::parse_double(cells[static_cast<std::size_t>(l) + 1],
                                row[static_cast<std::size_t>(l)])) {
        throw DataError("row " + std::to_string(line_no) + ": non-numeric cell");
      }
    }
    double target = 0.0;
    if (!detail::parse_double(cells.back(), target)) {
      throw DataError("row " + std::to_string(line_no) + ": non-numeric target");
    }
    const int expected = e.warmup_year + static_cast<int>(e.rows.size());
    if (year != expected) {
      throw DataError("row " + std::to_string(line_no) + ": expected year " +
                      std::to_string(expected) + ", got " + std::to_string(year));
    }
    e.rows.push_back(std::move(row));
    e.targets.push_back(target);
  }
  if (e.rows.empty()) throw DataError("no data rows in " + path);
  if (e.year_of_row(e.rows.size() - 1) != e.end_year) {
    throw DataError("endpoint matrix rows do not reach the sidecar end year");
  }
  return e;
}

}  // namespace frontcast

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "frontcast/errors.hpp"

namespace frontcast {

/// Annual univariate series: one value per consecutive year starting at
/// start_year. Values are totals in mm for rainfall data, but nothing in
/// this module assumes a unit.
struct TimeSeries {
  int start_year = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  int end_year() const { return start_year + static_cast<int>(values.size()) - 1; }
  bool covers(int year) const { return year >= start_year && year <= end_year(); }

  double at_year(int year) const {
    if (!covers(year)) {
      throw DataError("year " + std::to_string(year) + " outside series range " +
                      std::to_string(start_year) + ".." + std::to_string(end_year()));
    }
    return values[static_cast<std::size_t>(year - start_year)];
  }

  /// The sub-series from start_year through `year` inclusive.
  TimeSeries prefix_until(int year) const {
    if (!covers(year)) {
      throw DataError("prefix year " + std::to_string(year) + " outside series range");
    }
    TimeSeries p;
    p.start_year = start_year;
    p.values.assign(values.begin(), values.begin() + (year - start_year + 1));
    return p;
  }
};

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double sd_population = 0.0;  // divisor n
  double sd_sample = 0.0;      // divisor n-1
  double min = 0.0;
  double max = 0.0;
};

/// Forecast-quality metrics. PP = 1 - (RMSE/SD)^2 where SD is the population
/// standard deviation of the observations: 1 is a perfect prediction, 0
/// matches the constant-mean predictor.
struct Metrics {
  double rmse = 0.0;
  double pp = 0.0;
  double nrmse = 0.0;
  double mape = 0.0;
  double r = 0.0;
};

/// Standardization parameters (mean/SD), fit on training data only.
struct Scaler {
  double mean = 0.0;
  double sd = 1.0;
};

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double population_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

inline double population_sd(std::span<const double> v) {
  return std::sqrt(population_variance(v));
}

inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline void validate(const TimeSeries& ts) {
  if (ts.values.empty()) throw DataError("time series is empty");
  for (std::size_t i = 0; i < ts.values.size(); ++i) {
    if (!std::isfinite(ts.values[i])) {
      throw DataError("non-finite value at year " +
                      std::to_string(ts.start_year + static_cast<int>(i)));
    }
  }
}

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_int(const std::string& s, int& out) {
  const std::string t = strip(s);
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && p == last && !t.empty();
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = strip(s);
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && p == last && !t.empty();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Loads a two-column `year,value` CSV. Rows may arrive unsorted; they are
/// sorted by year. Duplicate years and gaps are rejected with the offending
/// row/year in the message.
inline TimeSeries load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  struct Row {
    int year;
    double value;
    std::size_t line_no;
  };
  std::vector<Row> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip a UTF-8 BOM on the first line
    if (line_no == 1 && line.size() >= 3 && line[0] == '\xEF' && line[1] == '\xBB' &&
        line[2] == '\xBF') {
      line.erase(0, 3);
    }
    if (detail::strip(line).empty()) continue;

    if (!header_seen) {
      std::string h = detail::strip(line);
      std::erase_if(h, [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
      std::transform(h.begin(), h.end(), h.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (h != "year,value") {
        throw DataError("row " + std::to_string(line_no) +
                        ": expected header 'year,value', got '" + detail::strip(line) + "'");
      }
      header_seen = true;
      continue;
    }

    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2) {
      throw DataError("row " + std::to_string(line_no) + ": expected 2 columns, got " +
                      std::to_string(cells.size()));
    }
    Row r{};
    r.line_no = line_no;
    if (!detail::parse_int(cells[0], r.year)) {
      throw DataError("row " + std::to_string(line_no) + ": non-numeric year cell '" +
                      detail::strip(cells[0]) + "'");
    }
    if (!detail::parse_double(cells[1], r.value)) {
      throw DataError("row " + std::to_string(line_no) + ": non-numeric value cell '" +
                      detail::strip(cells[1]) + "'");
    }
    if (!std::isfinite(r.value)) {
      throw DataError("row " + std::to_string(line_no) + ": non-finite value");
    }
    rows.push_back(r);
  }

  if (!header_seen) throw DataError("empty file: " + path);
  if (rows.empty()) throw DataError("no data rows in " + path);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.year < b.year; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].year == rows[i - 1].year) {
      throw DataError("duplicate year " + std::to_string(rows[i].year) + " (row " +
                      std::to_string(rows[i].line_no) + ")");
    }
    if (rows[i].year != rows[i - 1].year + 1) {
      throw DataError("gap at " + std::to_string(rows[i - 1].year + 1));
    }
  }

  TimeSeries ts;
  ts.start_year = rows.front().year;
  ts.values.reserve(rows.size());
  for (const Row& r : rows) ts.values.push_back(r.value);
  return ts;
}

inline Stats descriptive_stats(const TimeSeries& ts) {
  validate(ts);
  Stats s;
  s.count = ts.values.size();
  s.mean = mean_of(ts.values);
  s.sd_population = population_sd(ts.values);
  s.sd_sample = sample_sd(ts.values);
  s.min = *std::min_element(ts.values.begin(), ts.values.end());
  s.max = *std::max_element(ts.values.begin(), ts.values.end());
  return s;
}

/// Computes RMSE, PP, NRMSE, MAPE and Pearson r of predictions against
/// observations. MAPE terms with a zero observation are skipped with a
/// warning (pushed to `warnings` when provided). Throws NumericError when
/// the observations have zero variance (PP undefined).
inline Metrics compute_metrics(std::span<const double> predicted,
                               std::span<const double> observed,
                               std::vector<std::string>* warnings = nullptr) {
  if (predicted.size() != observed.size()) {
    throw DataError("metrics: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                    std::to_string(observed.size()) + ")");
  }
  if (observed.empty()) throw DataError("metrics: empty input");

  const std::size_t n = observed.size();
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = predicted[i] - observed[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);

  const double var = population_variance(observed);
  if (var == 0.0) {
    throw NumericError("metrics: observed values have zero standard deviation; PP undefined");
  }

  Metrics m;
  m.rmse = std::sqrt(mse);
  // Written as a ratio of squares so the constant-mean predictor lands on
  // exactly zero when both sums are accumulated the same way.
  m.pp = 1.0 - mse / var;

  const double obs_mean = mean_of(observed);
  m.nrmse = m.rmse / obs_mean;
  if (!std::isfinite(m.nrmse) && warnings) {
    warnings->push_back("metrics: NRMSE undefined (observed mean is zero)");
  }

  std::size_t mape_terms = 0;
  std::size_t mape_skipped = 0;
  double mape_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (observed[i] == 0.0) {
      ++mape_skipped;
      continue;
    }
    mape_sum += std::abs(predicted[i] - observed[i]) / std::abs(observed[i]);
    ++mape_terms;
  }
  if (mape_skipped > 0 && warnings) {
    warnings->push_back("metrics: MAPE skipped " + std::to_string(mape_skipped) +
                        " zero observation(s)");
  }
  m.mape = mape_terms > 0 ? mape_sum / static_cast<double>(mape_terms)
                          : std::numeric_limits<double>::quiet_NaN();

  const double pred_mean = mean_of(predicted);
  double cov_sum = 0.0;
  double pred_ss = 0.0;
  double obs_ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = predicted[i] - pred_mean;
    const double dob = observed[i] - obs_mean;
    cov_sum += dp * dob;
    pred_ss += dp * dp;
    obs_ss += dob * dob;
  }
  if (pred_ss == 0.0) {
    m.r = std::numeric_limits<double>::quiet_NaN();
    if (warnings) warnings->push_back("metrics: Pearson r undefined (constant predictions)");
  } else {
    m.r = cov_sum / std::sqrt(pred_ss * obs_ss);
  }
  return m;
}

/// Fits mean/SD (population convention) on the given values.
inline Scaler fit_scaler(std::span<const double> values) {
  if (values.size() < 2) throw ConfigError("scaler: need at least 2 values");
  Scaler s;
  s.mean = mean_of(values);
  s.sd = population_sd(values);
  if (s.sd == 0.0) throw NumericError("scaler: constant input (zero standard deviation)");
  return s;
}

inline std::vector<double> apply_scaler(const Scaler& s, std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - s.mean) / s.sd;
  return out;
}

inline std::vector<double> invert_scaler(const Scaler& s, std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * s.sd + s.mean;
  return out;
}

}  // namespace frontcast

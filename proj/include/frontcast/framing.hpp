#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "frontcast/errors.hpp"
#include "frontcast/moving_front.hpp"

namespace frontcast {

struct YearRange {
  int first = 0;
  int last = -1;  // last < first means empty

  bool empty() const { return last < first; }
  int size() const { return empty() ? 0 : last - first + 1; }
  bool contains(int y) const { return y >= first && y <= last; }
};

/// Lag-window supervised pairs. The input for target year y is the L x k
/// block of endpoint rows y-L..y-1 (row-major, oldest row first); the row of
/// year y itself is never part of its own input, otherwise summing it would
/// already give the answer.
struct SupervisedSet {
  int lag = 0;
  int k = 0;
  std::vector<std::vector<double>> inputs;  // each lag*k, row-major
  std::vector<double> targets;
  std::vector<int> target_years;

  std::size_t size() const { return inputs.size(); }
};

inline SupervisedSet frame(const EndpointMatrix& e, int lag) {
  if (lag < 1) throw ConfigError("frame: lag must be >= 1");
  if (e.row_count() <= static_cast<std::size_t>(lag)) {
    throw ConfigError("frame: need more than " + std::to_string(lag) + " rows, have " +
                      std::to_string(e.row_count()));
  }
  SupervisedSet s;
  s.lag = lag;
  s.k = e.k;
  const std::size_t n = e.row_count();
  s.inputs.reserve(n - static_cast<std::size_t>(lag));
  for (std::size_t t = static_cast<std::size_t>(lag); t < n; ++t) {
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(lag) * static_cast<std::size_t>(e.k));
    for (std::size_t j = t - static_cast<std::size_t>(lag); j < t; ++j) {
      window.insert(window.end(), e.rows[j].begin(), e.rows[j].end());
    }
    s.inputs.push_back(std::move(window));
    s.targets.push_back(e.targets[t]);
    s.target_years.push_back(e.year_of_row(t));
  }
  return s;
}

/// The final L rows as one window, used to forecast the year after the
/// matrix ends.
inline std::vector<double> last_window(const EndpointMatrix& e, int lag) {
  if (lag < 1) throw ConfigError("last window: lag must be >= 1");
  if (e.row_count() < static_cast<std::size_t>(lag)) {
    throw ConfigError("last window: need at least " + std::to_string(lag) + " rows");
  }
  std::vector<double> window;
  window.reserve(static_cast<std::size_t>(lag) * static_cast<std::size_t>(e.k));
  for (std::size_t j = e.row_count() - static_cast<std::size_t>(lag); j < e.row_count(); ++j) {
    window.insert(window.end(), e.rows[j].begin(), e.rows[j].end());
  }
  return window;
}

struct SplitSpec {
  YearRange train;
  YearRange test;
  YearRange forecast;  // may be empty

  void check() const {
    if (train.empty()) throw ConfigError("split: empty training range");
    if (test.empty()) throw ConfigError("split: empty testing range");
    if (test.first != train.last + 1) {
      throw ConfigError("split: test range must start right after the training range");
    }
    if (!forecast.empty() && forecast.first != test.last + 1) {
      throw ConfigError("split: forecast range must start right after the testing range");
    }
  }
};

struct SplitSets {
  SupervisedSet train;
  SupervisedSet test;
  SupervisedSet forecast;
};

/// Routes pairs by target year. The head of the training range is truncated
/// by the lag (those targets have no full window); the test and forecast
/// ranges must be fully covered.
inline SplitSets split(const SupervisedSet& s, const SplitSpec& spec) {
  spec.check();
  if (s.target_years.empty()) throw ConfigError("split: empty supervised set");

  const int first_target = s.target_years.front();
  const int last_target = s.target_years.back();
  if (first_target > spec.train.last) {
    throw DataError("split: training range ends before the first available target year " +
                    std::to_string(first_target));
  }
  auto require_covered = [&](const YearRange& r, const std::string& name) {
    if (r.empty()) return;
    if (r.first < first_target || r.last > last_target) {
      throw DataError("split: " + name + " range " + std::to_string(r.first) + ".." +
                      std::to_string(r.last) + " not covered by target years " +
                      std::to_string(first_target) + ".." + std::to_string(last_target));
    }
  };
  require_covered(spec.test, "test");
  require_covered(spec.forecast, "forecast");

  SplitSets out;
  for (SupervisedSet* p : {&out.train, &out.test, &out.forecast}) {
    p->lag = s.lag;
    p->k = s.k;
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int y = s.target_years[i];
    SupervisedSet* dest = nullptr;
    if (spec.train.contains(y)) dest = &out.train;
    else if (spec.test.contains(y)) dest = &out.test;
    else if (spec.forecast.contains(y)) dest = &out.forecast;
    if (!dest) continue;
    dest->inputs.push_back(s.inputs[i]);
    dest->targets.push_back(s.targets[i]);
    dest->target_years.push_back(y);
  }
  if (out.train.size() == 0) throw DataError("split: no training pairs");
  if (out.test.size() == 0) throw DataError("split: no testing pairs");
  return out;
}

/// Debug export: flattened window columns c{l}_{t-j}, then target,
/// target_year.
inline void save_supervised_csv(const SupervisedSet& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (int j = s.lag; j >= 1; --j) {
    for (int l = 1; l <= s.k; ++l) {
      out << 'c' << l << "_t-" << j << ',';
    }
  }
  out << "target,target_year\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (double v : s.inputs[i]) out << detail::format_double(v) << ',';
    out << detail::format_double(s.targets[i]) << ',' << s.target_years[i] << '\n';
  }
}

}  // namespace frontcast

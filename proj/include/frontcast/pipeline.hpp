#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "frontcast/errors.hpp"
#include "frontcast/framing.hpp"
#include "frontcast/lstm.hpp"
#include "frontcast/moving_front.hpp"
#include "frontcast/series.hpp"

namespace frontcast {

inline void to_json(nlohmann::json& j, const YearRange& r) {
  j = {{"first", r.first}, {"last", r.last}};
}

inline void from_json(const nlohmann::json& j, YearRange& r) {
  r.first = j.value("first", r.first);
  r.last = j.value("last", r.last);
}

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
  j = {{"train", s.train}, {"test", s.test}, {"forecast", s.forecast}};
}

inline void from_json(const nlohmann::json& j, SplitSpec& s) {
  if (j.contains("train")) j.at("train").get_to(s.train);
  if (j.contains("test")) j.at("test").get_to(s.test);
  if (j.contains("forecast")) j.at("forecast").get_to(s.forecast);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"optimizer", c.optimizer == TrainConfig::Optimizer::Adam ? "adam" : "gd"},
       {"n_runs", c.n_runs},
       {"hidden_dim", c.hidden_dim},
       {"use_bias", c.use_bias},
       {"candidate", c.candidate == CandidateActivation::Tanh ? "tanh" : "sigmoid"}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("optimizer")) {
    const std::string o = j.at("optimizer");
    if (o == "adam") c.optimizer = TrainConfig::Optimizer::Adam;
    else if (o == "gd") c.optimizer = TrainConfig::Optimizer::GradientDescent;
    else throw ConfigError("unknown optimizer '" + o + "' (expected adam or gd)");
  }
  c.n_runs = j.value("n_runs", c.n_runs);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.use_bias = j.value("use_bias", c.use_bias);
  if (j.contains("candidate")) {
    const std::string a = j.at("candidate");
    if (a == "tanh") c.candidate = CandidateActivation::Tanh;
    else if (a == "sigmoid") c.candidate = CandidateActivation::Sigmoid;
    else throw ConfigError("unknown candidate activation '" + a + "'");
  }
}

/// Everything one end-to-end run needs. Defaults follow the reference setup:
/// warmup front 1901, nine modes, lag 4, split 1901-1980 / 1981-1999 /
/// 2000-2022, 20-run ensembles.
struct PipelineConfig {
  std::string data_path;
  int warmup_year = 1901;
  int lag = 4;
  DecomposerConfig decomposer;
  SplitSpec split{{1901, 1980}, {1981, 1999}, {2000, 2022}};
  TrainConfig train;
  bool wfv_ensemble = false;    // ensemble per WFV step instead of one model
  bool wfv_cold_start = false;  // re-initialize instead of warm-starting

  void check() const {
    if (data_path.empty()) throw ConfigError("config: data path missing");
    if (lag < 1) throw ConfigError("config: lag must be >= 1");
    split.check();
    train.check();
  }
};

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"data", c.data_path},       {"warmup_year", c.warmup_year},
       {"lag", c.lag},              {"decomposer", c.decomposer},
       {"split", c.split},          {"train", c.train},
       {"wfv_ensemble", c.wfv_ensemble}, {"wfv_cold_start", c.wfv_cold_start}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c.data_path = j.value("data", c.data_path);
  c.warmup_year = j.value("warmup_year", c.warmup_year);
  c.lag = j.value("lag", c.lag);
  if (j.contains("decomposer")) j.at("decomposer").get_to(c.decomposer);
  if (j.contains("split")) j.at("split").get_to(c.split);
  if (j.contains("train")) j.at("train").get_to(c.train);
  c.wfv_ensemble = j.value("wfv_ensemble", c.wfv_ensemble);
  c.wfv_cold_start = j.value("wfv_cold_start", c.wfv_cold_start);
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("config parse error: " + std::string(ex.what()));
  }
  PipelineConfig c;
  try {
    j.get_to(c);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("config field error: " + std::string(ex.what()));
  }
  return c;
}

/// FNV-1a over the canonical JSON form; stamped into reports so a result
/// can be traced back to its exact configuration.
inline std::string config_hash(const PipelineConfig& c) {
  const std::string dump = nlohmann::json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// The series, its endpoint matrix, and the train-range scaling applied to
/// it. Scalers are fit on training-range rows only and reused unchanged in
/// every later phase; refitting them would leak future statistics and break
/// the batch/WFV equivalence.
struct PipelineData {
  TimeSeries ts;
  EndpointMatrix matrix;  // raw, in mm
  std::vector<Scaler> column_scalers;
  Scaler target_scaler;
  EndpointMatrix scaled;
  SupervisedSet all_pairs;  // scaled
  SplitSets sets;           // scaled
};

namespace detail {

inline EndpointMatrix scale_matrix(const EndpointMatrix& e,
                                   const std::vector<Scaler>& column_scalers,
                                   const Scaler& target_scaler) {
  if (column_scalers.size() != static_cast<std::size_t>(e.k)) {
    throw ConfigError("scaling: scaler count != k");
  }
  EndpointMatrix out = e;
  for (auto& row : out.rows) {
    for (std::size_t l = 0; l < row.size(); ++l) {
      row[l] = (row[l] - column_scalers[l].mean) / column_scalers[l].sd;
    }
  }
  for (auto& t : out.targets) t = (t - target_scaler.mean) / target_scaler.sd;
  return out;
}

}  // namespace detail

inline PipelineData prepare_data(const PipelineConfig& cfg) {
  cfg.check();
  PipelineData d;
  d.ts = load_csv(cfg.data_path);
  d.matrix = build_endpoint_matrix(d.ts, cfg.warmup_year, cfg.decomposer);

  if (cfg.split.train.last < cfg.warmup_year + cfg.lag) {
    throw ConfigError("config: training range ends before the first framed target year");
  }
  const std::size_t first = d.matrix.row_index(cfg.warmup_year);
  const std::size_t last = d.matrix.row_index(std::min(cfg.split.train.last, d.matrix.end_year));
  std::vector<double> column(last - first + 1);
  for (int l = 0; l < d.matrix.k; ++l) {
    for (std::size_t i = first; i <= last; ++i) {
      column[i - first] = d.matrix.rows[i][static_cast<std::size_t>(l)];
    }
    d.column_scalers.push_back(fit_scaler(column));
  }
  std::vector<double> train_targets(d.matrix.targets.begin() + static_cast<long>(first),
                                    d.matrix.targets.begin() + static_cast<long>(last) + 1);
  d.target_scaler = fit_scaler(train_targets);

  d.scaled = detail::scale_matrix(d.matrix, d.column_scalers, d.target_scaler);
  d.all_pairs = frame(d.scaled, cfg.lag);
  d.sets = split(d.all_pairs, cfg.split);
  return d;
}

struct PhaseResult {
  std::string phase;
  Metrics metrics;
  std::vector<int> years;
  std::vector<double> observed;
  std::vector<double> predicted;
  double runtime_seconds = 0.0;
  std::string note;
};

struct RunReport {
  PipelineConfig config;
  std::string hash;
  std::vector<PhaseResult> phases;
  std::vector<std::string> warnings;
  double future_forecast = std::numeric_limits<double>::quiet_NaN();
  int future_year = 0;
};

namespace detail {

class PhaseTimer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline PhaseResult evaluate_phase(const std::string& name, std::span<const LstmModel> models,
                                  const SupervisedSet& set, const PipelineData& d,
                                  std::vector<std::string>* warnings) {
  PhaseResult p;
  p.phase = name;
  p.years = set.target_years;
  const auto scaled_preds = predict_mean(models, set.inputs);
  p.predicted = invert_scaler(d.target_scaler, scaled_preds);
  p.observed.reserve(set.size());
  for (int y : set.target_years) p.observed.push_back(d.ts.at_year(y));
  p.metrics = compute_metrics(p.predicted, p.observed, warnings);
  return p;
}

}  // namespace detail

/// Train/test evaluation: ensemble-trains on the training pairs (last 10%
/// held out for early stopping) and reports metrics over both ranges in mm.
inline RunReport run_train_test(const PipelineConfig& cfg, const PipelineData& d) {
  RunReport report;
  report.config = cfg;
  report.hash = config_hash(cfg);

  detail::PhaseTimer timer;
  const auto [core, val] = split_validation_tail(d.sets.train);
  const auto models = train_ensemble(cfg.train, core, val, &report.warnings);
  const double train_time = timer.seconds();

  detail::PhaseTimer t_train;
  auto train_phase =
      detail::evaluate_phase("train", models, d.sets.train, d, &report.warnings);
  train_phase.runtime_seconds = train_time + t_train.seconds();
  train_phase.note = "ensemble of " + std::to_string(models.size()) + " runs";
  report.phases.push_back(std::move(train_phase));

  detail::PhaseTimer t_test;
  auto test_phase = detail::evaluate_phase("test", models, d.sets.test, d, &report.warnings);
  test_phase.runtime_seconds = t_test.seconds();
  test_phase.note = "ensemble of " + std::to_string(models.size()) + " runs";
  report.phases.push_back(std::move(test_phase));
  return report;
}

inline RunReport run_train_test(const PipelineConfig& cfg) {
  const PipelineData d = prepare_data(cfg);
  return run_train_test(cfg, d);
}

/// Retrains on the train+test ranges with unchanged hyperparameters; this is
/// the model that forecasting phases consume.
inline LstmModel finalize_model(const PipelineConfig& cfg, const PipelineData& d,
                                std::vector<std::string>* warnings = nullptr) {
  SupervisedSet full;
  full.lag = d.all_pairs.lag;
  full.k = d.all_pairs.k;
  for (std::size_t i = 0; i < d.all_pairs.size(); ++i) {
    if (d.all_pairs.target_years[i] > cfg.split.test.last) break;
    full.inputs.push_back(d.all_pairs.inputs[i]);
    full.targets.push_back(d.all_pairs.targets[i]);
    full.target_years.push_back(d.all_pairs.target_years[i]);
  }
  if (full.size() == 0) throw ConfigError("finalize: no pairs up to the test range end");
  const auto [core, val] = split_validation_tail(full);
  const TrainResult r = train(cfg.train, core, val);
  if (r.diverged) throw NumericError("finalize: training diverged");
  if (warnings && r.best_epoch >= 0) {
    warnings->push_back("finalize: best validation at epoch " + std::to_string(r.best_epoch));
  }
  return r.model;
}

/// All forecast windows in one pass through the frozen model. The observed
/// values exist for the whole range, so this is an in-sample forecast; the
/// note records that.
inline PhaseResult forecast_batch(const LstmModel& model, const PipelineData& d,
                                  std::vector<std::string>* warnings = nullptr) {
  detail::PhaseTimer timer;
  PhaseResult p;
  p.phase = "forecast_batch";
  p.note = "in-sample forecast (observations already existed)";
  if (d.sets.forecast.size() == 0) {
    p.runtime_seconds = timer.seconds();
    return p;
  }
  const LstmModel single[] = {model};
  p = detail::evaluate_phase("forecast_batch", single, d.sets.forecast, d, warnings);
  p.note = "in-sample forecast (observations already existed)";
  p.runtime_seconds = timer.seconds();
  return p;
}

/// Walk-forward validation without retraining: one window at a time through
/// the frozen model. Produces bit-identical output to forecast_batch.
inline PhaseResult wfv_no_retrain(const LstmModel& model, const PipelineConfig& cfg,
                                  const PipelineData& d,
                                  std::vector<std::string>* warnings = nullptr) {
  detail::PhaseTimer timer;
  PhaseResult p;
  p.phase = "wfv_no_retrain";
  p.note = "frozen model, one year at a time";
  const YearRange range = cfg.split.forecast;
  if (range.empty()) {
    p.runtime_seconds = timer.seconds();
    return p;
  }
  for (int y = range.first; y <= range.last; ++y) {
    const std::size_t end_row = d.scaled.row_index(y - 1);
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(cfg.lag) * static_cast<std::size_t>(d.scaled.k));
    for (std::size_t j = end_row + 1 - static_cast<std::size_t>(cfg.lag); j <= end_row; ++j) {
      window.insert(window.end(), d.scaled.rows[j].begin(), d.scaled.rows[j].end());
    }
    const double scaled_pred = forward_sequence(model, window);
    p.years.push_back(y);
    p.predicted.push_back(scaled_pred * d.target_scaler.sd + d.target_scaler.mean);
    p.observed.push_back(d.ts.at_year(y));
  }
  p.metrics = compute_metrics(p.predicted, p.observed, warnings);
  p.runtime_seconds = timer.seconds();
  return p;
}

/// Walk-forward validation with retraining: when the observation for a year
/// arrives, the endpoint matrix is extended through it and the model is
/// retrained (warm start by default) with unchanged hyperparameters before
/// forecasting the next year. A diverging step keeps the previous model and
/// is flagged.
inline PhaseResult wfv_retrain(const PipelineConfig& cfg, const PipelineData& d,
                               const LstmModel& final_model,
                               std::vector<std::string>* warnings = nullptr) {
  detail::PhaseTimer timer;
  PhaseResult p;
  p.phase = "wfv_retrain";
  p.note = cfg.wfv_ensemble ? "per-step ensemble" : "single warm-started model per step";
  if (cfg.wfv_cold_start) p.note += ", cold start";
  const YearRange range = cfg.split.forecast;
  if (range.empty()) {
    p.runtime_seconds = timer.seconds();
    return p;
  }

  // Known history at the start of forecasting: everything through the test
  // range. Rows are recomputed here (not sliced from d.matrix) so this path
  // exercises the same extend() protocol a live deployment would use;
  // endpoint stability makes both bit-identical.
  EndpointMatrix current =
      build_endpoint_matrix(d.ts.prefix_until(cfg.split.test.last), cfg.warmup_year,
                            cfg.decomposer);
  std::vector<LstmModel> models{final_model};
  std::size_t trained_on = frame(current, cfg.lag).size();

  for (int y = range.first; y <= range.last; ++y) {
    if (current.end_year < y - 1) {
      current = extend_endpoint_matrix(current, d.ts.prefix_until(y - 1));
    }
    const EndpointMatrix scaled =
        detail::scale_matrix(current, d.column_scalers, d.target_scaler);
    const SupervisedSet pairs = frame(scaled, cfg.lag);

    if (pairs.size() > trained_on) {
      const auto [core, val] = split_validation_tail(pairs);
      if (cfg.wfv_ensemble) {
        try {
          models = train_ensemble(cfg.train, core, val, warnings);
          trained_on = pairs.size();
        } catch (const NumericError& ex) {
          if (warnings) {
            warnings->push_back("wfv_retrain year " + std::to_string(y) + ": " + ex.what() +
                                "; keeping previous models");
          }
        }
      } else {
        const LstmModel* warm = cfg.wfv_cold_start ? nullptr : &models.front();
        const TrainResult r = train(cfg.train, core, val, warm);
        if (r.diverged) {
          if (warnings) {
            warnings->push_back("wfv_retrain year " + std::to_string(y) +
                                ": retraining diverged; keeping previous model");
          }
        } else {
          models.front() = r.model;
          trained_on = pairs.size();
        }
      }
    }

    const std::vector<double> window = last_window(scaled, cfg.lag);
    double scaled_pred = 0.0;
    for (const auto& m : models) scaled_pred += forward_sequence(m, window);
    scaled_pred /= static_cast<double>(models.size());
    p.years.push_back(y);
    p.predicted.push_back(scaled_pred * d.target_scaler.sd + d.target_scaler.mean);
    p.observed.push_back(d.ts.at_year(y));
  }
  p.metrics = compute_metrics(p.predicted, p.observed, warnings);
  p.runtime_seconds = timer.seconds();
  return p;
}

/// One step past the end of the data: the forecast for end_year + 1 from the
/// final lag window.
inline std::pair<int, double> forecast_next_year(const LstmModel& model,
                                                 const PipelineConfig& cfg,
                                                 const PipelineData& d) {
  const std::vector<double> window = last_window(d.scaled, cfg.lag);
  const double scaled_pred = forward_sequence(model, window);
  return {d.matrix.end_year + 1, scaled_pred * d.target_scaler.sd + d.target_scaler.mean};
}

struct DecomposerProfile {
  std::string id;
  SdProfile profile;
  double flatness = 0.0;  // max mode SD / mean mode SD
};

namespace detail {

inline double flatness_of(const SdProfile& p) {
  if (p.mode_sd.empty()) return 0.0;
  double sum = 0.0, mx = 0.0;
  for (double v : p.mode_sd) {
    sum += v;
    mx = std::max(mx, v);
  }
  const double mean = sum / static_cast<double>(p.mode_sd.size());
  return mean == 0.0 ? 0.0 : mx / mean;
}

}  // namespace detail

/// Per-decomposer SD profile of the one-time decomposition of the series,
/// plus a flatness score. Lower flatness means the variability spreads more
/// evenly across modes. Additional pre-computed decompositions (e.g. from
/// another toolkit) can be passed as name -> ModeMatrix CSV path.
inline std::vector<DecomposerProfile> compare_decomposers(
    const TimeSeries& ts, const DecomposerConfig& cfg,
    const std::vector<std::pair<std::string, std::string>>& imported = {}) {
  validate(ts);
  std::vector<DecomposerProfile> out;

  DecomposerProfile ewt_row;
  ewt_row.id = "ewt";
  ewt_row.profile = mode_sd_profile(ewt_decompose(ts, cfg.ewt).modes);
  ewt_row.flatness = detail::flatness_of(ewt_row.profile);
  out.push_back(std::move(ewt_row));

  DecomposerProfile emd_row;
  emd_row.id = "emd";
  emd_row.profile = mode_sd_profile(emd(ts, cfg.sift));
  emd_row.flatness = detail::flatness_of(emd_row.profile);
  out.push_back(std::move(emd_row));

  DecomposerProfile eemd_row;
  eemd_row.id = "eemd";
  eemd_row.profile = mode_sd_profile(eemd(ts, cfg.sift));
  eemd_row.flatness = detail::flatness_of(eemd_row.profile);
  out.push_back(std::move(eemd_row));

  for (const auto& [name, path] : imported) {
    DecomposerProfile row;
    row.id = name;
    row.profile = mode_sd_profile(load_mode_csv(path));
    row.flatness = detail::flatness_of(row.profile);
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline void save_predictions_csv(const PhaseResult& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "year,observed,predicted\n";
  for (std::size_t i = 0; i < p.years.size(); ++i) {
    out << p.years[i] << ',' << detail::format_double(p.observed[i]) << ','
        << detail::format_double(p.predicted[i]) << '\n';
  }
}

inline void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"rmse", m.rmse}, {"pp", m.pp}, {"nrmse", m.nrmse}, {"mape", m.mape}, {"r", m.r}};
}

inline void write_report(const RunReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  nlohmann::json j;
  j["config"] = report.config;
  j["config_hash"] = report.hash;
  j["warnings"] = report.warnings;
  if (report.future_year != 0) {
    j["future_forecast"] = {{"year", report.future_year}, {"value", report.future_forecast}};
  }
  nlohmann::json phases = nlohmann::json::object();
  for (const auto& p : report.phases) {
    phases[p.phase] = {{"metrics", p.metrics},
                       {"years", p.years.empty() ? 0 : static_cast<int>(p.years.size())},
                       {"runtime_seconds", p.runtime_seconds},
                       {"note", p.note}};
  }
  j["phases"] = phases;

  std::ofstream jf(fs::path(out_dir) / "report.json");
  if (!jf) throw DataError("cannot write report.json in " + out_dir);
  jf << j.dump(2) << '\n';

  std::ofstream mf(fs::path(out_dir) / "metrics.csv");
  if (!mf) throw DataError("cannot write metrics.csv in " + out_dir);
  mf << "phase,rmse,pp,nrmse,mape,r\n";
  for (const auto& p : report.phases) {
    if (p.years.empty()) continue;
    mf << p.phase << ',' << detail::format_double(p.metrics.rmse) << ','
       << detail::format_double(p.metrics.pp) << ',' << detail::format_double(p.metrics.nrmse)
       << ',' << detail::format_double(p.metrics.mape) << ','
       << detail::format_double(p.metrics.r) << '\n';
  }

  for (const auto& p : report.phases) {
    if (p.years.empty()) continue;
    save_predictions_csv(p, (fs::path(out_dir) / (p.phase + "_predictions.csv")).string());
  }
}

}  // namespace frontcast

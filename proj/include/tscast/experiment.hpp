#pragma once

// The experiment pipeline: resolve a dataset, normalize and window every
// series, train one LSTM and one GRU on the configured training series,
// evaluate every model on every series' test rows, compare per-series
// metrics with Mann-Whitney tests, and emit the result files. Fully
// deterministic under a fixed master seed: the dataset generator and each
// training run get seeds derived from it in a fixed order.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tscast/checkpoint.hpp"
#include "tscast/dataprep.hpp"
#include "tscast/errors.hpp"
#include "tscast/mannwhitney.hpp"
#include "tscast/metrics.hpp"
#include "tscast/training.hpp"

namespace tscast {

enum class DatasetKind { Activities, RandomWalk, CsvDir, CsvFile };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Activities;
  std::string path;  // CsvDir / CsvFile only
  std::string column = "Close";
  ActivitiesConfig activities;
  RandomWalkConfig random_walk;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::size_t window = 60;
  std::vector<std::size_t> horizons = {1, 20};
  std::size_t test_samples = 251;
  std::size_t train_index = 0;
  std::vector<ModelKind> models = {ModelKind::Lstm, ModelKind::Gru, ModelKind::Baseline};
  std::size_t units = 128;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  std::optional<double> gradient_clip;
  std::uint64_t seed = 42;
  bool norm_train_only = false;
  bool peepholes = true;
  bool output_peephole_prev_cell = false;
  bool exclude_train_series = false;
  std::size_t plot_range = 100;
  bool emit_svg = false;

  bool has_model(ModelKind k) const {
    for (ModelKind m : models)
      if (m == k) return true;
    return false;
  }
};

/// Derives independent seeds from the master seed; stream 0 feeds the
/// dataset generator, streams 1+ the training runs (fixed order).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct StatsRow {
  std::string comparison;
  MannWhitneyResult mw;
};

struct SummaryRow {
  ModelKind model = ModelKind::Baseline;
  std::size_t horizon = 1;
  double rmse_mean = 0.0, rmse_sd = 0.0;
  double da_mean = 0.0, da_sd = 0.0;
};

struct LabeledModel {
  std::string label;  // e.g. "lstm_f1"
  TrainedModel model;
};

/// Test-horizon data for one series at f = 1, in original units.
struct PlotSeries {
  std::string series;
  std::vector<std::size_t> t;  // global sample index of each test target
  std::vector<double> actual;
  std::vector<double> lstm, gru, baseline;  // empty when the model was not run
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ForecastReport> reports;
  std::vector<StatsRow> stats;
  std::vector<SummaryRow> summary;
  std::vector<std::pair<std::string, std::vector<double>>> loss_histories;
  std::vector<LabeledModel> models;
  std::vector<PlotSeries> plots;
};

// ---------------------------------------------------------------------------
// Config file: plain `key = value` lines, '#' comments. serialize_config and
// parse_config round-trip, so a written config reproduces the run.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string bool_str(bool b) { return b ? "true" : "false"; }

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline std::size_t parse_count(const std::string& v, const std::string& key) {
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a count, got '" + v + "'");
  }
}

inline double parse_real(const std::string& v, const std::string& key) {
  return parse_number(v, "config: key '" + key + "'");
}

inline std::string dataset_str(const DatasetSpec& d) {
  switch (d.kind) {
    case DatasetKind::Activities: return "activities";
    case DatasetKind::RandomWalk: return "random-walk";
    case DatasetKind::CsvDir: return "csv-dir:" + d.path;
    default: return "csv-file:" + d.path;
  }
}

inline void parse_dataset(const std::string& v, DatasetSpec& d) {
  if (v == "activities") {
    d.kind = DatasetKind::Activities;
  } else if (v == "random-walk") {
    d.kind = DatasetKind::RandomWalk;
  } else if (v.rfind("csv-dir:", 0) == 0) {
    d.kind = DatasetKind::CsvDir;
    d.path = v.substr(8);
  } else if (v.rfind("csv-file:", 0) == 0) {
    d.kind = DatasetKind::CsvFile;
    d.path = v.substr(9);
  } else {
    throw ConfigError("config: unknown dataset '" + v +
                      "' (expected activities, random-walk, csv-dir:<path>, csv-file:<path>)");
  }
}

inline std::string models_str(const std::vector<ModelKind>& models) {
  std::string s;
  for (ModelKind m : models) {
    if (!s.empty()) s += ",";
    s += to_string(m);
  }
  return s;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  items.push_back(trim(cur));
  return items;
}

inline std::vector<ModelKind> parse_models(const std::string& v) {
  std::vector<ModelKind> models;
  for (const std::string& item : split_list(v)) {
    if (item == "lstm") {
      models.push_back(ModelKind::Lstm);
    } else if (item == "gru") {
      models.push_back(ModelKind::Gru);
    } else if (item == "baseline") {
      models.push_back(ModelKind::Baseline);
    } else {
      throw ConfigError("config: unknown model '" + item + "'");
    }
  }
  if (models.empty()) throw ConfigError("config: models list is empty");
  return models;
}

inline std::vector<std::size_t> parse_counts(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(v)) out.push_back(parse_count(item, key));
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects at least one value");
  return out;
}

}  // namespace detail

inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "dataset = " << detail::dataset_str(c.dataset) << "\n";
  out << "column = " << c.dataset.column << "\n";
  out << "window = " << c.window << "\n";
  std::string hs;
  for (std::size_t h : c.horizons) {
    if (!hs.empty()) hs += ",";
    hs += std::to_string(h);
  }
  out << "horizons = " << hs << "\n";
  out << "test_samples = " << c.test_samples << "\n";
  out << "train_index = " << c.train_index << "\n";
  out << "models = " << detail::models_str(c.models) << "\n";
  out << "units = " << c.units << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "learning_rate = " << detail::fmt17(c.learning_rate) << "\n";
  out << "gradient_clip = " << (c.gradient_clip ? detail::fmt17(*c.gradient_clip) : "none")
      << "\n";
  out << "seed = " << c.seed << "\n";
  out << "norm_train_only = " << detail::bool_str(c.norm_train_only) << "\n";
  out << "peepholes = " << detail::bool_str(c.peepholes) << "\n";
  out << "output_peephole_prev_cell = " << detail::bool_str(c.output_peephole_prev_cell) << "\n";
  out << "exclude_train_series = " << detail::bool_str(c.exclude_train_series) << "\n";
  out << "plot_range = " << c.plot_range << "\n";
  out << "emit_svg = " << detail::bool_str(c.emit_svg) << "\n";
  out << "activities.n_series = " << c.dataset.activities.n_series << "\n";
  out << "activities.length = " << c.dataset.activities.length << "\n";
  out << "activities.slope = " << detail::fmt17(c.dataset.activities.slope) << "\n";
  out << "activities.noise_sd = " << detail::fmt17(c.dataset.activities.noise_sd) << "\n";
  out << "activities.scale_min = " << detail::fmt17(c.dataset.activities.scale_min) << "\n";
  out << "activities.scale_max = " << detail::fmt17(c.dataset.activities.scale_max) << "\n";
  out << "activities.noise_after_scaling = "
      << detail::bool_str(c.dataset.activities.noise_after_scaling) << "\n";
  out << "rwalk.n_series = " << c.dataset.random_walk.n_series << "\n";
  out << "rwalk.length = " << c.dataset.random_walk.length << "\n";
  out << "rwalk.sd_min = " << detail::fmt17(c.dataset.random_walk.sd_min) << "\n";
  out << "rwalk.sd_max = " << detail::fmt17(c.dataset.random_walk.sd_max) << "\n";
  out << "rwalk.start = " << detail::fmt17(c.dataset.random_walk.start) << "\n";
  return out.str();
}

inline void set_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_count;
  using detail::parse_real;
  if (key == "dataset") {
    detail::parse_dataset(value, c.dataset);
  } else if (key == "column") {
    c.dataset.column = value;
  } else if (key == "window") {
    c.window = parse_count(value, key);
  } else if (key == "horizons") {
    c.horizons = detail::parse_counts(value, key);
  } else if (key == "test_samples") {
    c.test_samples = parse_count(value, key);
  } else if (key == "train_index") {
    c.train_index = parse_count(value, key);
  } else if (key == "models") {
    c.models = detail::parse_models(value);
  } else if (key == "units") {
    c.units = parse_count(value, key);
  } else if (key == "epochs") {
    c.epochs = parse_count(value, key);
  } else if (key == "batch_size") {
    c.batch_size = parse_count(value, key);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_real(value, key);
  } else if (key == "gradient_clip") {
    if (value == "none") {
      c.gradient_clip.reset();
    } else {
      c.gradient_clip = parse_real(value, key);
    }
  } else if (key == "seed") {
    c.seed = std::stoull(value);
  } else if (key == "norm_train_only") {
    c.norm_train_only = parse_bool(value, key);
  } else if (key == "peepholes") {
    c.peepholes = parse_bool(value, key);
  } else if (key == "output_peephole_prev_cell") {
    c.output_peephole_prev_cell = parse_bool(value, key);
  } else if (key == "exclude_train_series") {
    c.exclude_train_series = parse_bool(value, key);
  } else if (key == "plot_range") {
    c.plot_range = parse_count(value, key);
  } else if (key == "emit_svg") {
    c.emit_svg = parse_bool(value, key);
  } else if (key == "activities.n_series") {
    c.dataset.activities.n_series = parse_count(value, key);
  } else if (key == "activities.length") {
    c.dataset.activities.length = parse_count(value, key);
  } else if (key == "activities.slope") {
    c.dataset.activities.slope = parse_real(value, key);
  } else if (key == "activities.noise_sd") {
    c.dataset.activities.noise_sd = parse_real(value, key);
  } else if (key == "activities.scale_min") {
    c.dataset.activities.scale_min = parse_real(value, key);
  } else if (key == "activities.scale_max") {
    c.dataset.activities.scale_max = parse_real(value, key);
  } else if (key == "activities.noise_after_scaling") {
    c.dataset.activities.noise_after_scaling = parse_bool(value, key);
  } else if (key == "rwalk.n_series") {
    c.dataset.random_walk.n_series = parse_count(value, key);
  } else if (key == "rwalk.length") {
    c.dataset.random_walk.length = parse_count(value, key);
  } else if (key == "rwalk.sd_min") {
    c.dataset.random_walk.sd_min = parse_real(value, key);
  } else if (key == "rwalk.sd_max") {
    c.dataset.random_walk.sd_max = parse_real(value, key);
  } else if (key == "rwalk.start") {
    c.dataset.random_walk.start = parse_real(value, key);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    }
    set_config_key(c, detail::trim(stripped.substr(0, eq)), detail::trim(stripped.substr(eq + 1)));
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  return parse_config(in);
}

/// `quick` shrinks the run for desk-scale checks; `full` restores the
/// reference settings (10 series of 3584 samples, 128 units, 200 epochs).
inline void apply_profile(ExperimentConfig& c, const std::string& profile) {
  if (profile == "quick") {
    c.units = 32;
    c.epochs = 30;
    c.dataset.activities.n_series = 4;
    c.dataset.activities.length = 700;
    c.dataset.random_walk.n_series = 4;
    c.dataset.random_walk.length = 700;
  } else if (profile == "full") {
    c.units = 128;
    c.epochs = 200;
    c.dataset.activities.n_series = 10;
    c.dataset.activities.length = 3584;
    c.dataset.random_walk.n_series = 10;
    c.dataset.random_walk.length = 3584;
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected quick or full)");
  }
}

// ---------------------------------------------------------------------------
// Pipeline.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Series> resolve_dataset(const ExperimentConfig& cfg) {
  switch (cfg.dataset.kind) {
    case DatasetKind::Activities:
      return generate_activities(cfg.dataset.activities, derive_seed(cfg.seed, 0));
    case DatasetKind::RandomWalk:
      return generate_random_walks(cfg.dataset.random_walk, derive_seed(cfg.seed, 0));
    case DatasetKind::CsvFile:
      return load_multi_csv(cfg.dataset.path);
    case DatasetKind::CsvDir: {
      namespace fs = std::filesystem;
      std::vector<fs::path> files;
      if (!fs::is_directory(cfg.dataset.path)) {
        throw DataError("dataset: '" + cfg.dataset.path + "' is not a directory");
      }
      for (const auto& entry : fs::directory_iterator(cfg.dataset.path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
          files.push_back(entry.path());
        }
      }
      if (files.empty()) {
        throw DataError("dataset: no .csv files in '" + cfg.dataset.path + "'");
      }
      std::sort(files.begin(), files.end());
      std::vector<Series> set;
      set.reserve(files.size());
      for (const auto& f : files) set.push_back(load_csv(f, cfg.dataset.column));
      // Align lengths the way the stock dataset was stored: keep every
      // series' last min-length samples.
      std::size_t min_len = set[0].length();
      for (const auto& s : set) min_len = std::min(min_len, s.length());
      for (auto& s : set) s = truncate_tail(s, min_len);
      return set;
    }
  }
  throw ConfigError("dataset: unhandled kind");
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator).
inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::uint64_t train_stream(ModelKind kind, std::size_t horizon_index) {
  return 1 + horizon_index * 4 + (kind == ModelKind::Lstm ? 0 : 1);
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.horizons.empty()) throw ConfigError("experiment: no horizons configured");
  if (cfg.models.empty()) throw ConfigError("experiment: no models configured");

  const std::vector<Series> raw = detail::resolve_dataset(cfg);
  if (cfg.train_index >= raw.size()) {
    throw ConfigError("experiment: train_index " + std::to_string(cfg.train_index) +
                      " out of range for " + std::to_string(raw.size()) + " series");
  }

  // Normalization records: full-series min/max by default, or min/max of
  // the pre-test prefix when norm_train_only is set.
  std::vector<NormalizedSeries> normalized;
  normalized.reserve(raw.size());
  for (const Series& s : raw) {
    NormRecord rec;
    if (cfg.norm_train_only) {
      if (s.length() <= cfg.test_samples) {
        throw ConfigError("experiment: series '" + s.name + "' shorter than test_samples");
      }
      rec = min_max_of(std::span<const double>(s.values).first(s.length() - cfg.test_samples),
                       s.name);
    } else {
      rec = min_max_of(s.values, s.name);
    }
    normalized.push_back({apply_normalization(s, rec), rec});
  }

  ExperimentResult result;
  result.config = cfg;

  const bool want_lstm = cfg.has_model(ModelKind::Lstm);
  const bool want_gru = cfg.has_model(ModelKind::Gru);
  const bool want_baseline = cfg.has_model(ModelKind::Baseline);

  for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
    const std::size_t f = cfg.horizons[hi];
    std::vector<WindowedDataset> windows;
    windows.reserve(normalized.size());
    for (const auto& ns : normalized) {
      windows.push_back(make_windows(ns, cfg.window, f, cfg.test_samples));
    }

    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.units = cfg.units;
    tc.gradient_clip = cfg.gradient_clip;
    tc.peepholes = cfg.peepholes;
    tc.output_peephole_prev_cell = cfg.output_peephole_prev_cell;

    const TrainedModel* lstm_model = nullptr;
    const TrainedModel* gru_model = nullptr;
    const std::string suffix = "_f" + std::to_string(f);
    if (want_lstm) {
      tc.seed = derive_seed(cfg.seed, detail::train_stream(ModelKind::Lstm, hi));
      TrainResult tr = train(CellKind::Lstm, windows[cfg.train_index], tc);
      result.loss_histories.emplace_back("lstm" + suffix, std::move(tr.loss_history));
      result.models.push_back({"lstm" + suffix, std::move(tr.model)});
      lstm_model = &result.models.back().model;
    }
    if (want_gru) {
      tc.seed = derive_seed(cfg.seed, detail::train_stream(ModelKind::Gru, hi));
      TrainResult tr = train(CellKind::Gru, windows[cfg.train_index], tc);
      result.loss_histories.emplace_back("gru" + suffix, std::move(tr.loss_history));
      result.models.push_back({"gru" + suffix, std::move(tr.model)});
      gru_model = &result.models.back().model;
    }

    // Per-series evaluation, in configured model order.
    struct MetricColumns {
      std::vector<double> rmse, da;
    };
    MetricColumns columns[3];  // indexed by ModelKind
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (cfg.exclude_train_series && i == cfg.train_index) continue;
      const WindowedDataset& data = windows[i];
      detail::require_test_rows(data);

      Matrix lstm_preds, gru_preds, baseline_preds;
      for (ModelKind kind : cfg.models) {
        ForecastReport rep;
        switch (kind) {
          case ModelKind::Lstm:
            lstm_preds = detail::predict_rows(*lstm_model, data);
            rep = detail::report_from_predictions(data, lstm_preds, ModelKind::Lstm);
            break;
          case ModelKind::Gru:
            gru_preds = detail::predict_rows(*gru_model, data);
            rep = detail::report_from_predictions(data, gru_preds, ModelKind::Gru);
            break;
          default:
            baseline_preds = detail::baseline_rows(data);
            rep = detail::report_from_predictions(data, baseline_preds, ModelKind::Baseline);
            break;
        }
        columns[static_cast<int>(rep.model)].rmse.push_back(rep.rmse);
        columns[static_cast<int>(rep.model)].da.push_back(rep.da);
        result.reports.push_back(rep);
      }

      if (f == 1) {
        PlotSeries ps;
        ps.series = data.source;
        const std::size_t n_test = data.test_rows();
        const double range = data.norm.range();
        const double base = data.norm.v_min;
        for (std::size_t r = 0; r < n_test; ++r) {
          const std::size_t t = data.n_train + data.window + r;
          ps.t.push_back(t);
          ps.actual.push_back(raw[i].values[t]);
          if (want_lstm) ps.lstm.push_back(lstm_preds(r, 0) * range + base);
          if (want_gru) ps.gru.push_back(gru_preds(r, 0) * range + base);
          if (want_baseline) ps.baseline.push_back(baseline_preds(r, 0) * range + base);
        }
        result.plots.push_back(std::move(ps));
      }
    }

    // Mann-Whitney comparisons over the per-series metric samples.
    const std::pair<ModelKind, ModelKind> pairs[] = {
        {ModelKind::Lstm, ModelKind::Baseline},
        {ModelKind::Gru, ModelKind::Baseline},
        {ModelKind::Lstm, ModelKind::Gru},
    };
    for (const auto& [a, b] : pairs) {
      if (!cfg.has_model(a) || !cfg.has_model(b)) continue;
      const auto& ca = columns[static_cast<int>(a)];
      const auto& cb = columns[static_cast<int>(b)];
      const std::string tag =
          std::string(to_string(a)) + "_vs_" + to_string(b);
      result.stats.push_back(
          {tag + "_rmse" + suffix, mann_whitney_two_tailed(ca.rmse, cb.rmse)});
      result.stats.push_back({tag + "_da" + suffix, mann_whitney_two_tailed(ca.da, cb.da)});
    }

    for (ModelKind kind : cfg.models) {
      const auto& col = columns[static_cast<int>(kind)];
      SummaryRow row;
      row.model = kind;
      row.horizon = f;
      row.rmse_mean = detail::mean_of(col.rmse);
      row.rmse_sd = detail::sample_sd(col.rmse);
      row.da_mean = detail::mean_of(col.da);
      row.da_sd = detail::sample_sd(col.da);
      result.summary.push_back(row);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// File emission.
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, const char* what) {
  std::ofstream out(path);
  if (!out) throw DataError(std::string(what) + ": cannot open '" + path.string() + "'");
  return out;
}

inline void write_plot_svg(const std::filesystem::path& path, const PlotSeries& ps,
                           std::size_t rows) {
  constexpr double kW = 860, kH = 420, kPad = 40;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  auto widen = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < std::min(rows, v.size()); ++i) {
      if (first) {
        lo = hi = v[i];
        first = false;
      } else {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
      }
    }
  };
  widen(ps.actual);
  widen(ps.lstm);
  widen(ps.gru);
  widen(ps.baseline);
  if (hi == lo) hi = lo + 1.0;

  auto polyline = [&](std::ostream& out, const std::vector<double>& v, const char* color) {
    if (v.empty() || rows == 0) return;
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    const std::size_t count = std::min(rows, v.size());
    for (std::size_t i = 0; i < count; ++i) {
      const double x = kPad + (kW - 2 * kPad) * (count > 1 ? static_cast<double>(i) / (count - 1) : 0.5);
      const double y = kH - kPad - (kH - 2 * kPad) * (v[i] - lo) / (hi - lo);
      out << x << "," << y << " ";
    }
    out << "\"/>\n";
  };

  std::ofstream out = open_out(path, "plot svg");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kW << " " << kH
      << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <text x=\"" << kPad << "\" y=\"20\" font-size=\"14\">" << ps.series
      << " - actual (black), lstm (blue), gru (green), baseline (gray)</text>\n";
  polyline(out, ps.actual, "black");
  polyline(out, ps.lstm, "#1f77b4");
  polyline(out, ps.gru, "#2ca02c");
  polyline(out, ps.baseline, "#888888");
  out << "</svg>\n";
}

}  // namespace detail

/// Writes `plot_<series>.csv` (first `range` test points, denormalized) and
/// optionally a minimal SVG line chart next to it.
inline void emit_plot_data(const ExperimentResult& result, const std::string& series,
                           std::size_t range, const std::filesystem::path& csv_path,
                           bool svg = false) {
  const PlotSeries* found = nullptr;
  for (const auto& ps : result.plots) {
    if (ps.series == series) {
      found = &ps;
      break;
    }
  }
  if (!found) throw ConfigError("plot-data: unknown series '" + series + "'");

  const std::size_t rows = std::min(range, found->t.size());
  std::ofstream out = detail::open_out(csv_path, "plot-data");
  out << "t,actual,lstm,gru,baseline\n";
  for (std::size_t i = 0; i < rows; ++i) {
    out << found->t[i] << "," << detail::fmt17(found->actual[i]) << ",";
    if (!found->lstm.empty()) out << detail::fmt17(found->lstm[i]);
    out << ",";
    if (!found->gru.empty()) out << detail::fmt17(found->gru[i]);
    out << ",";
    if (!found->baseline.empty()) out << detail::fmt17(found->baseline[i]);
    out << "\n";
  }
  out.close();
  if (svg) {
    std::filesystem::path svg_path = csv_path;
    svg_path.replace_extension(".svg");
    detail::write_plot_svg(svg_path, *found, rows);
  }
}

/// Rebuilds the f = 1 plot payload from already-trained models (as loaded
/// from checkpoints); resolves the dataset exactly like run_experiment but
/// performs no training.
inline std::vector<PlotSeries> rebuild_plot_payload(const ExperimentConfig& cfg,
                                                    const TrainedModel* lstm,
                                                    const TrainedModel* gru) {
  const std::vector<Series> raw = detail::resolve_dataset(cfg);
  std::vector<PlotSeries> plots;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (cfg.exclude_train_series && i == cfg.train_index) continue;
    const Series& s = raw[i];
    NormRecord rec;
    if (cfg.norm_train_only) {
      rec = min_max_of(std::span<const double>(s.values).first(s.length() - cfg.test_samples),
                       s.name);
    } else {
      rec = min_max_of(s.values, s.name);
    }
    const NormalizedSeries ns{apply_normalization(s, rec), rec};
    const WindowedDataset data = make_windows(ns, cfg.window, 1, cfg.test_samples);
    detail::require_test_rows(data);

    PlotSeries ps;
    ps.series = s.name;
    const Matrix lstm_preds = lstm ? detail::predict_rows(*lstm, data) : Matrix();
    const Matrix gru_preds = gru ? detail::predict_rows(*gru, data) : Matrix();
    const Matrix baseline_preds =
        cfg.has_model(ModelKind::Baseline) ? detail::baseline_rows(data) : Matrix();
    for (std::size_t r = 0; r < data.test_rows(); ++r) {
      const std::size_t t = data.n_train + data.window + r;
      ps.t.push_back(t);
      ps.actual.push_back(s.values[t]);
      if (lstm) ps.lstm.push_back(lstm_preds(r, 0) * rec.range() + rec.v_min);
      if (gru) ps.gru.push_back(gru_preds(r, 0) * rec.range() + rec.v_min);
      if (!baseline_preds.empty()) {
        ps.baseline.push_back(baseline_preds(r, 0) * rec.range() + rec.v_min);
      }
    }
    plots.push_back(std::move(ps));
  }
  return plots;
}

/// Writes the full output tree into `dir`. An INCOMPLETE marker file exists
/// while writing and is removed last, so interrupted runs are identifiable.
inline void write_experiment_files(const ExperimentResult& result,
                                   const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path marker = dir / "INCOMPLETE";
  {
    std::ofstream m = detail::open_out(marker, "experiment");
  }

  {
    std::ofstream out = detail::open_out(dir / "reports.csv", "experiment");
    out << "series,model,f,rmse,da\n";
    for (const ForecastReport& r : result.reports) {
      out << r.series << "," << to_string(r.model) << "," << r.horizon << ","
          << detail::fmt17(r.rmse) << "," << detail::fmt17(r.da) << "\n";
    }
  }
  {
    std::ofstream out = detail::open_out(dir / "stats.csv", "experiment");
    out << "comparison,u,n1,n2,p,method\n";
    for (const StatsRow& s : result.stats) {
      out << s.comparison << "," << detail::fmt17(s.mw.u_statistic) << "," << s.mw.n1 << ","
          << s.mw.n2 << "," << detail::fmt17(s.mw.p_two_tailed) << "," << to_string(s.mw.method)
          << "\n";
    }
  }
  {
    std::ofstream out = detail::open_out(dir / "summary.csv", "experiment");
    out << "model,f,rmse_mean,rmse_sd,da_mean,da_sd\n";
    for (const SummaryRow& s : result.summary) {
      out << to_string(s.model) << "," << s.horizon << "," << detail::fmt17(s.rmse_mean) << ","
          << detail::fmt17(s.rmse_sd) << "," << detail::fmt17(s.da_mean) << ","
          << detail::fmt17(s.da_sd) << "\n";
    }
  }
  for (const auto& [label, history] : result.loss_histories) {
    std::ofstream out = detail::open_out(dir / ("loss_" + label + ".csv"), "experiment");
    out << "epoch,mse\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
      out << (e + 1) << "," << detail::fmt17(history[e]) << "\n";
    }
  }
  for (const LabeledModel& lm : result.models) {
    save_model(dir / ("model_" + lm.label + ".ckpt"), lm.model);
  }
  for (const PlotSeries& ps : result.plots) {
    emit_plot_data(result, ps.series, result.config.plot_range,
                   dir / ("plot_" + ps.series + ".csv"), result.config.emit_svg);
  }
  {
    std::ofstream out = detail::open_out(dir / "config.echo", "experiment");
    out << serialize_config(result.config);
  }
  fs::remove(marker);
}

}  // namespace tscast

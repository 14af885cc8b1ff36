// tscast command-line runner: dataset generation, training, evaluation,
// the full experiment pipeline, and plot-data extraction.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tscast/tscast.hpp"

namespace fs = std::filesystem;
using namespace tscast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct DatasetFlags {
  std::string dataset = "activities";
  std::string column = "Close";
  std::size_t n_series = 0;  // 0 = keep default
  std::size_t length = 0;
  double slope = -1.0;
  double noise_sd = -1.0;
  double scale_min = -1.0;
  double scale_max = -1.0;
  bool noise_after_scaling = false;
  double sd_min = -1.0;
  double sd_max = -1.0;
  double start = -1.0;
};

void add_dataset_flags(CLI::App* cmd, DatasetFlags& d) {
  cmd->add_option("--dataset", d.dataset,
                  "activities | random-walk | path to a .csv file or a directory of per-series "
                  "CSVs (Date + value column)");
  cmd->add_option("--column", d.column, "value column for per-series CSVs (default Close)");
  cmd->add_option("--n-series", d.n_series, "generator: number of series");
  cmd->add_option("--length", d.length, "generator: samples per series");
  cmd->add_option("--slope", d.slope, "activities: linear trend per step");
  cmd->add_option("--noise-sd", d.noise_sd, "activities: Gaussian noise sd");
  cmd->add_option("--scale-min", d.scale_min, "activities: lower per-series scale bound");
  cmd->add_option("--scale-max", d.scale_max, "activities: upper per-series scale bound");
  cmd->add_flag("--noise-after-scaling", d.noise_after_scaling,
                "activities: add noise after scaling instead of before");
  cmd->add_option("--sd-min", d.sd_min, "random-walk: lower increment-sd bound");
  cmd->add_option("--sd-max", d.sd_max, "random-walk: upper increment-sd bound");
  cmd->add_option("--start", d.start, "random-walk: starting level");
}

void apply_dataset_flags(const CLI::App* cmd, const DatasetFlags& d, ExperimentConfig& cfg) {
  if (cmd->count("--dataset")) {
    if (d.dataset == "activities") {
      cfg.dataset.kind = DatasetKind::Activities;
    } else if (d.dataset == "random-walk") {
      cfg.dataset.kind = DatasetKind::RandomWalk;
    } else if (fs::is_directory(d.dataset)) {
      cfg.dataset.kind = DatasetKind::CsvDir;
      cfg.dataset.path = d.dataset;
    } else {
      cfg.dataset.kind = DatasetKind::CsvFile;
      cfg.dataset.path = d.dataset;
    }
  }
  if (cmd->count("--column")) cfg.dataset.column = d.column;
  if (cmd->count("--n-series")) {
    cfg.dataset.activities.n_series = d.n_series;
    cfg.dataset.random_walk.n_series = d.n_series;
  }
  if (cmd->count("--length")) {
    cfg.dataset.activities.length = d.length;
    cfg.dataset.random_walk.length = d.length;
  }
  if (cmd->count("--slope")) cfg.dataset.activities.slope = d.slope;
  if (cmd->count("--noise-sd")) cfg.dataset.activities.noise_sd = d.noise_sd;
  if (cmd->count("--scale-min")) cfg.dataset.activities.scale_min = d.scale_min;
  if (cmd->count("--scale-max")) cfg.dataset.activities.scale_max = d.scale_max;
  if (cmd->count("--noise-after-scaling")) cfg.dataset.activities.noise_after_scaling = true;
  if (cmd->count("--sd-min")) cfg.dataset.random_walk.sd_min = d.sd_min;
  if (cmd->count("--sd-max")) cfg.dataset.random_walk.sd_max = d.sd_max;
  if (cmd->count("--start")) cfg.dataset.random_walk.start = d.start;
}

std::vector<ModelKind> parse_model_list(const std::string& s) {
  return detail::parse_models(s);
}

void print_report(const ForecastReport& r) {
  std::printf("%-12s %-8s f=%-3zu rmse=%.6f da=%.4f rmse_denorm=%.6f\n", r.series.c_str(),
              to_string(r.model), r.horizon, r.rmse, r.da, r.rmse_denorm);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tscast - recurrent-network time series forecasting toolkit"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset and write it as CSV");
  DatasetFlags gen_flags;
  add_dataset_flags(gen, gen_flags);
  std::string gen_out = "dataset.csv";
  std::uint64_t gen_seed = 42;
  gen->add_option("--out", gen_out, "output CSV path");
  gen->add_option("--seed", gen_seed, "generator seed");

  // ---- shared train/experiment knobs ----
  struct RunFlags {
    std::size_t window = 60;
    std::string steps = "1,20";
    std::size_t test_samples = 251;
    std::size_t train_index = 0;
    std::size_t units = 128;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double lr = 0.001;
    double clip = 0.0;
    std::uint64_t seed = 42;
    bool norm_train_only = false;
    bool no_peepholes = false;
    bool output_peephole_prev_cell = false;
  };
  auto add_run_flags = [](CLI::App* cmd, RunFlags& r, bool multi_step) {
    cmd->add_option("--window", r.window, "window size w");
    if (multi_step) {
      cmd->add_option("--steps", r.steps, "comma-separated forecast horizons (default 1,20)");
    } else {
      cmd->add_option("--steps", r.steps, "forecast horizon f");
    }
    cmd->add_option("--test-samples", r.test_samples, "trailing samples reserved for testing");
    cmd->add_option("--train-index", r.train_index, "index of the training series");
    cmd->add_option("--units", r.units, "recurrent units");
    cmd->add_option("--epochs", r.epochs, "training epochs");
    cmd->add_option("--batch-size", r.batch_size, "mini-batch size");
    cmd->add_option("--lr", r.lr, "Adam learning rate");
    cmd->add_option("--clip", r.clip, "global gradient-norm clip (0 disables)");
    cmd->add_option("--seed", r.seed, "master seed");
    cmd->add_flag("--norm-train-only", r.norm_train_only,
                  "normalize with min/max of the pre-test prefix only");
    cmd->add_flag("--no-peepholes", r.no_peepholes, "disable LSTM peephole connections");
    cmd->add_flag("--output-peephole-prev-cell", r.output_peephole_prev_cell,
                  "output-gate peephole reads the previous cell value");
  };
  auto apply_run_flags = [](const CLI::App* cmd, const RunFlags& r, ExperimentConfig& cfg) {
    if (cmd->count("--window")) cfg.window = r.window;
    if (cmd->count("--steps")) cfg.horizons = detail::parse_counts(r.steps, "steps");
    if (cmd->count("--test-samples")) cfg.test_samples = r.test_samples;
    if (cmd->count("--train-index")) cfg.train_index = r.train_index;
    if (cmd->count("--units")) cfg.units = r.units;
    if (cmd->count("--epochs")) cfg.epochs = r.epochs;
    if (cmd->count("--batch-size")) cfg.batch_size = r.batch_size;
    if (cmd->count("--lr")) cfg.learning_rate = r.lr;
    if (cmd->count("--clip")) {
      if (r.clip > 0.0) {
        cfg.gradient_clip = r.clip;
      } else {
        cfg.gradient_clip.reset();
      }
    }
    if (cmd->count("--seed")) cfg.seed = r.seed;
    if (cmd->count("--norm-train-only")) cfg.norm_train_only = true;
    if (cmd->count("--no-peepholes")) cfg.peepholes = false;
    if (cmd->count("--output-peephole-prev-cell")) cfg.output_peephole_prev_cell = true;
  };

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train one model on one series and save a checkpoint");
  DatasetFlags tr_data;
  add_dataset_flags(tr, tr_data);
  RunFlags tr_run;
  tr_run.steps = "1";
  add_run_flags(tr, tr_run, false);
  std::string tr_model = "lstm";
  std::string tr_out = "out";
  tr->add_option("--model", tr_model, "lstm or gru")->check(CLI::IsMember({"lstm", "gru"}));
  tr->add_option("--out", tr_out, "output directory");

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on every series");
  DatasetFlags ev_data;
  add_dataset_flags(ev, ev_data);
  RunFlags ev_run;
  add_run_flags(ev, ev_run, false);
  std::string ev_ckpt;
  std::string ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint file")->required();
  ev->add_option("--out", ev_out, "optional reports CSV path");

  // ---- experiment ----
  auto* ex = app.add_subcommand("experiment", "run the full train/evaluate/compare pipeline");
  DatasetFlags ex_data;
  add_dataset_flags(ex, ex_data);
  RunFlags ex_run;
  add_run_flags(ex, ex_run, true);
  std::string ex_config, ex_profile, ex_models, ex_out = "out";
  bool ex_exclude_train = false, ex_svg = false;
  std::size_t ex_plot_range = 100;
  ex->add_option("--config", ex_config, "key = value config file (flags override it)");
  ex->add_option("--profile", ex_profile, "quick or full")
      ->check(CLI::IsMember({"quick", "full"}));
  ex->add_option("--models", ex_models, "comma-separated subset of lstm,gru,baseline");
  ex->add_option("--out", ex_out, "output directory");
  ex->add_flag("--exclude-train-series", ex_exclude_train,
               "leave the training series out of evaluation and statistics");
  ex->add_flag("--svg", ex_svg, "emit SVG line charts next to plot CSVs");
  ex->add_option("--plot-range", ex_plot_range, "test points per plot file (default 100)");

  // ---- plot-data ----
  auto* pd = app.add_subcommand("plot-data",
                                "re-emit plot data for one series from an experiment directory");
  std::string pd_from, pd_series, pd_out;
  std::size_t pd_range = 100;
  bool pd_svg = false;
  pd->add_option("--from", pd_from, "experiment output directory")->required();
  pd->add_option("--series", pd_series, "series name")->required();
  pd->add_option("--range", pd_range, "number of test points (default 100)");
  pd->add_option("--out", pd_out, "output CSV path (default plot_<series>.csv in --from)");
  pd->add_flag("--svg", pd_svg, "also write an SVG chart");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ExperimentConfig cfg;
      apply_dataset_flags(gen, gen_flags, cfg);
      cfg.seed = gen_seed;
      std::vector<Series> set;
      switch (cfg.dataset.kind) {
        case DatasetKind::Activities:
          set = generate_activities(cfg.dataset.activities, gen_seed);
          break;
        case DatasetKind::RandomWalk:
          set = generate_random_walks(cfg.dataset.random_walk, gen_seed);
          break;
        default:
          throw ConfigError("generate: --dataset must be activities or random-walk");
      }
      write_multi_csv(gen_out, set);
      std::printf("wrote %zu series x %zu samples to %s\n", set.size(), set[0].length(),
                  gen_out.c_str());
      return kExitOk;
    }

    if (tr->parsed()) {
      ExperimentConfig cfg;
      apply_dataset_flags(tr, tr_data, cfg);
      apply_run_flags(tr, tr_run, cfg);
      if (!tr->count("--steps")) cfg.horizons = {1};
      if (cfg.horizons.size() != 1) throw ConfigError("train: --steps must be a single horizon");
      cfg.models = parse_model_list(tr_model);
      fs::create_directories(tr_out);

      ExperimentResult result = run_experiment(cfg);
      const LabeledModel& lm = result.models.at(0);
      save_model(fs::path(tr_out) / ("model_" + lm.label + ".ckpt"), lm.model);
      {
        std::ofstream out(fs::path(tr_out) / ("loss_" + lm.label + ".csv"));
        out << "epoch,mse\n";
        const auto& history = result.loss_histories.at(0).second;
        for (std::size_t e = 0; e < history.size(); ++e) {
          out << (e + 1) << "," << detail::fmt17(history[e]) << "\n";
        }
      }
      std::ofstream(fs::path(tr_out) / "config.echo") << serialize_config(cfg);
      std::printf("trained %s: final training mse %.6g\n", lm.label.c_str(),
                  lm.model.final_loss);
      for (const ForecastReport& r : result.reports) print_report(r);
      return kExitOk;
    }

    if (ev->parsed()) {
      ExperimentConfig cfg;
      apply_dataset_flags(ev, ev_data, cfg);
      apply_run_flags(ev, ev_run, cfg);
      const TrainedModel model = load_model(ev_ckpt);
      cfg.horizons = {model.horizon()};
      if (model.trained_window != 0) cfg.window = model.trained_window;

      const std::vector<Series> raw = detail::resolve_dataset(cfg);
      std::vector<ForecastReport> reports;
      for (const Series& s : raw) {
        NormRecord rec = cfg.norm_train_only
                             ? min_max_of(std::span<const double>(s.values)
                                              .first(s.values.size() - cfg.test_samples),
                                          s.name)
                             : min_max_of(s.values, s.name);
        const NormalizedSeries ns{apply_normalization(s, rec), rec};
        const WindowedDataset data = make_windows(ns, cfg.window, model.horizon(),
                                                  cfg.test_samples);
        reports.push_back(evaluate_model(model, data));
        print_report(reports.back());
      }
      if (!ev_out.empty()) {
        std::ofstream out(ev_out);
        out << "series,model,f,rmse,da\n";
        for (const ForecastReport& r : reports) {
          out << r.series << "," << to_string(r.model) << "," << r.horizon << ","
              << detail::fmt17(r.rmse) << "," << detail::fmt17(r.da) << "\n";
        }
      }
      return kExitOk;
    }

    if (ex->parsed()) {
      ExperimentConfig cfg;
      if (!ex_config.empty()) cfg = load_config(ex_config);
      if (!ex_profile.empty()) apply_profile(cfg, ex_profile);
      apply_dataset_flags(ex, ex_data, cfg);
      apply_run_flags(ex, ex_run, cfg);
      if (ex->count("--models")) cfg.models = parse_model_list(ex_models);
      if (ex->count("--exclude-train-series")) cfg.exclude_train_series = true;
      if (ex->count("--svg")) cfg.emit_svg = true;
      if (ex->count("--plot-range")) cfg.plot_range = ex_plot_range;

      ExperimentResult result = run_experiment(cfg);
      write_experiment_files(result, ex_out);

      for (const SummaryRow& s : result.summary) {
        std::printf("f=%-3zu %-8s rmse %.4f +/- %.4f   da %.4f +/- %.4f\n", s.horizon,
                    to_string(s.model), s.rmse_mean, s.rmse_sd, s.da_mean, s.da_sd);
      }
      for (const StatsRow& s : result.stats) {
        std::printf("%-28s U=%-6.1f p=%.4g (%s)\n", s.comparison.c_str(), s.mw.u_statistic,
                    s.mw.p_two_tailed, to_string(s.mw.method));
      }
      std::printf("outputs in %s\n", ex_out.c_str());
      return kExitOk;
    }

    if (pd->parsed()) {
      const fs::path dir(pd_from);
      ExperimentConfig cfg = load_config(dir / "config.echo");
      std::optional<TrainedModel> lstm, gru;
      for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        if (cfg.horizons[hi] != 1) continue;
        const fs::path lk = dir / "model_lstm_f1.ckpt";
        const fs::path gk = dir / "model_gru_f1.ckpt";
        if (fs::exists(lk)) lstm = load_model(lk);
        if (fs::exists(gk)) gru = load_model(gk);
      }
      ExperimentResult shim;
      shim.config = cfg;
      shim.plots = rebuild_plot_payload(cfg, lstm ? &*lstm : nullptr, gru ? &*gru : nullptr);
      const fs::path out =
          pd_out.empty() ? dir / ("plot_" + pd_series + ".csv") : fs::path(pd_out);
      emit_plot_data(shim, pd_series, pd_range, out, pd_svg);
      std::printf("wrote %s\n", out.string().c_str());
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}

// Command-line driver: synth, train, forecast, evaluate, backtest.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omm/benchmarks.hpp"
#include "omm/config.hpp"
#include "omm/errors.hpp"
#include "omm/pipeline.hpp"
#include "omm/simulate.hpp"

namespace fs = std::filesystem;
using namespace omm;

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kData = 3, kModel = 4 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> panel;
  std::optional<std::string> model;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", o.seed, "Override the master seed");
  cmd->add_option("--out", o.out, "Override the output directory");
  cmd->add_option("--panel", o.panel, "Override the panel CSV path");
  cmd->add_option("--model", o.model, "Override the model archive path");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores); results do not depend on it");
}

RunConfig resolve(const CommonOptions& o) {
  auto cfg = load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.paths.out_dir = *o.out;
  if (o.panel) cfg.paths.panel = *o.panel;
  if (o.model) cfg.paths.model = *o.model;
  if (o.threads) cfg.threads = *o.threads;
  cfg.validate();
  fs::create_directories(cfg.paths.out_dir);
  return cfg;
}

CovariateSchema schema_of(const RunConfig& cfg) {
  CovariateSchema schema;
  for (const auto& g : cfg.groups)
    for (const auto& c : g.columns) schema[c] = g.name;
  return schema;
}

PanelDataset load_config_panel(const RunConfig& cfg) {
  if (!fs::exists(cfg.paths.panel)) throw DataError("panel file not found: " + cfg.paths.panel.string());
  return load_panel(cfg.paths.panel, schema_of(cfg));
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  fn(out);
}

int cmd_synth(const RunConfig& cfg) {
  const auto panel = synth_panel(cfg.synth, cfg.seed);
  const auto path = cfg.paths.out_dir / "panel.csv";
  write_panel(path, panel);
  write_sidecar(path, provenance_of(cfg), {{"rows", panel.n_rows()}, {"units", panel.units.size()}});
  std::cout << "wrote " << path.string() << " (" << panel.n_rows() << " rows)\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg) {
  const auto panel = load_config_panel(cfg);
  const auto split = cfg.resolve_split(panel.last_month());
  const auto models = train_models(panel, cfg, split.train_end_month);
  save_model_set(cfg.paths.model, models);
  write_sidecar(cfg.paths.model, provenance_of(cfg), {{"train_end_month", split.train_end_month}});
  std::cout << "trained on months <= " << split.train_end_month << "; wrote " << cfg.paths.model.string() << '\n';
  for (const auto& t : models.transitions.models) {
    std::cout << "  transition " << to_string(t.origin) << ": " << t.n_rows << " rows, ";
    if (t.classifier)
      std::cout << "classifier OOB accuracy " << t.classifier->oob_accuracy << '\n';
    else
      std::cout << "constant rate " << t.fallback_rate << (t.global_prior ? " (global prior)" : "") << '\n';
  }
  std::cout << "  outcome Escalation: " << models.outcomes.escalation.n_rows << " rows"
            << (models.outcomes.escalation.pooled ? " (pooled)" : "") << '\n';
  std::cout << "  outcome War: " << models.outcomes.war.n_rows << " rows"
            << (models.outcomes.war.pooled ? " (pooled)" : "") << '\n';
  return kOk;
}

int cmd_forecast(const RunConfig& cfg, bool with_benchmarks) {
  const auto panel = load_config_panel(cfg);
  if (!fs::exists(cfg.paths.model)) throw DataError("model archive not found: " + cfg.paths.model.string());
  const auto models = load_model_set(cfg.paths.model);
  const auto split = cfg.resolve_split(panel.last_month());
  const ForecastWindow window{split.forecast_start_month, split.horizon};
  const auto prov = provenance_of(cfg);
  const nlohmann::json window_meta{{"forecast_start_month", window.start}, {"horizon", window.horizon}};

  const auto draws = forecast_omm(models, panel, cfg, window);
  const auto draws_path = cfg.paths.out_dir / "forecast_draws.csv";
  write_draws(draws_path, draws);
  write_sidecar(draws_path, prov, window_meta);
  const auto summary_path = cfg.paths.out_dir / "forecast_summary.csv";
  write_file(summary_path, [&](std::ostream& os) {
    write_summary_csv(os, draws_summary(draws, cfg.summary_quantiles), cfg.summary_quantiles);
  });
  write_sidecar(summary_path, prov, window_meta);
  std::cout << "wrote " << draws_path.string() << " (" << draws.n_cells() * draws.n_draws() << " rows)\n";

  if (with_benchmarks) {
    for (const auto& [name, fd] : forecast_benchmarks(panel, models.metadata.train_end_month, cfg, window)) {
      const auto path = cfg.paths.out_dir / ("bench_" + name + ".csv");
      write_draws(path, fd);
      write_sidecar(path, prov, window_meta);
      std::cout << "wrote " << path.string() << '\n';
    }
  }
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& draw_args) {
  if (draw_args.empty()) throw ValidationError("evaluate: pass at least one --draws [name=]path");
  const auto panel = load_config_panel(cfg);
  std::vector<MetricReport> reports;
  std::optional<std::vector<CellKey>> cells;
  for (const auto& arg : draw_args) {
    const auto eq = arg.find('=');
    const std::string name = eq == std::string::npos ? fs::path(arg).stem().string() : arg.substr(0, eq);
    const fs::path path = eq == std::string::npos ? fs::path(arg) : fs::path(arg.substr(eq + 1));
    const auto fd = read_draws(path);
    auto keys = fd.cells;
    std::sort(keys.begin(), keys.end());
    if (!cells) cells = keys;
    else if (*cells != keys) throw DataError("evaluate: " + path.string() + " covers different cells than the first draw file");
    reports.push_back(evaluate(fd, panel, cfg.metrics, name));
  }
  const auto ranked = rank_reports(std::move(reports));
  const auto csv = cfg.paths.out_dir / "report.csv";
  write_file(csv, [&](std::ostream& os) { write_report_csv(os, ranked); });
  write_sidecar(csv, provenance_of(cfg));
  write_file(cfg.paths.out_dir / "report.txt", [&](std::ostream& os) { write_report_table(os, ranked); });
  write_report_table(std::cout, ranked);
  return kOk;
}

int cmd_backtest(const RunConfig& cfg) {
  const auto panel = load_config_panel(cfg);
  const auto result = run_backtest(panel, cfg);
  const auto csv = cfg.paths.out_dir / "backtest.csv";
  write_file(csv, [&](std::ostream& os) { write_backtest_csv(os, result); });
  write_sidecar(csv, provenance_of(cfg));
  for (const auto& o : result.origins) {
    std::cout << "origin " << o.cutoff << " (months " << o.window.start << ".." << o.window.end() << ")\n";
    write_report_table(std::cout, rank_reports(o.reports));
  }
  std::cout << "pooled\n";
  const auto pooled = rank_reports(result.pooled);
  write_report_table(std::cout, pooled);
  write_file(cfg.paths.out_dir / "backtest.txt", [&](std::ostream& os) { write_report_table(os, pooled); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observed Markov model forecaster for conflict fatalities"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic panel");
  add_common(synth, common);
  auto* train = app.add_subcommand("train", "Fit feature pipeline, transition and outcome models");
  add_common(train, common);
  auto* forecast = app.add_subcommand("forecast", "Simulate predictive draws for the forecast window");
  add_common(forecast, common);
  bool with_benchmarks = false;
  forecast->add_flag("--benchmarks", with_benchmarks, "Also write the four benchmark draw files");
  auto* evaluate = app.add_subcommand("evaluate", "Score draw files against actuals");
  add_common(evaluate, common);
  std::vector<std::string> draw_args;
  evaluate->add_option("--draws", draw_args, "Draw file, optionally as name=path (repeatable)");
  auto* backtest = app.add_subcommand("backtest", "Rolling-origin train/forecast/score");
  add_common(backtest, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    const auto cfg = resolve(common);
    if (*synth) return cmd_synth(cfg);
    if (*train) return cmd_train(cfg);
    if (*forecast) return cmd_forecast(cfg, with_benchmarks);
    if (*evaluate) return cmd_evaluate(cfg, draw_args);
    if (*backtest) return cmd_backtest(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

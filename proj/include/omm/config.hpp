#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "omm/features.hpp"
#include "omm/forest.hpp"
#include "omm/markov.hpp"
#include "omm/metrics.hpp"
#include "omm/panel.hpp"

namespace omm {

struct RunPaths {
  std::filesystem::path panel = "panel.csv";
  std::filesystem::path model = "model.omm";
  std::filesystem::path out_dir = "out";
};

/// Rolling origins: cutoffs at last_month - horizon - k*step for k = n_origins-1..0.
struct BacktestSpec {
  int n_origins = 3;
  int horizon = 12;
  int step = 12;
};

/// Everything a run needs, parsed from one JSON file. Missing keys take defaults;
/// unknown keys are rejected.
struct RunConfig {
  RunPaths paths;
  std::uint64_t seed = 42;
  int threads = 1;

  std::vector<FeatureGroupSpec> groups = default_feature_groups();
  double half_life = 12.0;
  ForestHyperparams classifier = ForestHyperparams::classifier_defaults();
  ForestHyperparams regressor = ForestHyperparams::regressor_defaults();
  bool log_target = true;

  Index n_draws = 1000;
  std::vector<double> summary_quantiles{0.05, 0.25, 0.5, 0.75, 0.95};
  std::optional<SplitSpec> split;  // default: last `horizon` months of the panel
  int horizon = 12;
  MetricConfig metrics;
  Index benchmark_draws = 1000;
  BacktestSpec backtest;
  SynthConfig synth;

  ModelFitOptions fit_options() const;
  /// Split to use against a panel ending at `last_month`.
  SplitSpec resolve_split(MonthId last_month) const;
  /// FNV-1a of the canonical JSON of every setting except paths.
  std::uint64_t hash() const;
  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace omm

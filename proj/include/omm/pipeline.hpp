#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omm/config.hpp"
#include "omm/draws.hpp"
#include "omm/markov.hpp"
#include "omm/metrics.hpp"

namespace omm {

/// Embedded in every output artifact's sidecar.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string code_version;

  nlohmann::json to_json() const;
};

Provenance provenance_of(const RunConfig& cfg);

/// Writes `<artifact>.meta.json` next to the artifact.
void write_sidecar(const std::filesystem::path& artifact, const Provenance& prov, const nlohmann::json& extra = {});

/// Fits the model set on rows with month <= train_end only.
FittedModelSet train_models(const PanelDataset& panel, const RunConfig& cfg, MonthId train_end);

/// Simulates the window from each unit's history up to the model's training cutoff.
ForecastDraws forecast_omm(const FittedModelSet& models, const PanelDataset& panel, const RunConfig& cfg,
                           const ForecastWindow& window);

/// The four benchmark forecasts, named by kind, from rows with month <= train_end.
std::vector<std::pair<std::string, ForecastDraws>> forecast_benchmarks(const PanelDataset& panel, MonthId train_end,
                                                                       const RunConfig& cfg,
                                                                       const ForecastWindow& window);

struct OriginResult {
  MonthId cutoff = 0;
  ForecastWindow window;
  std::vector<MetricReport> reports;  // omm first, then benchmarks
};

struct BacktestResult {
  std::vector<OriginResult> origins;
  std::vector<MetricReport> pooled;  // cell-weighted across origins, same model order
};

std::vector<MonthId> backtest_cutoffs(MonthId first_month, MonthId last_month, const BacktestSpec& spec);

/// `fitted`, when given, receives the model set of every origin in cutoff order.
BacktestResult run_backtest(const PanelDataset& panel, const RunConfig& cfg,
                            std::vector<FittedModelSet>* fitted = nullptr);

/// CSV: origin,model,n_cells,crps,ign,mis,coverage (origin "pooled" for the aggregate rows).
void write_backtest_csv(std::ostream& out, const BacktestResult& result);

}  // namespace omm

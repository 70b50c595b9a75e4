#include "omm/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <ostream>

#include "omm/benchmarks.hpp"
#include "omm/errors.hpp"
#include "omm/rng.hpp"
#include "omm/simulate.hpp"

namespace omm {

nlohmann::json Provenance::to_json() const {
  char hex[17];
  auto [p, ec] = std::to_chars(hex, hex + 16, config_hash, 16);
  return {{"config_hash", std::string(hex, p)}, {"seed", seed}, {"code_version", code_version}};
}

Provenance provenance_of(const RunConfig& cfg) { return {cfg.hash(), cfg.seed, OMM_VERSION}; }

void write_sidecar(const std::filesystem::path& artifact, const Provenance& prov, const nlohmann::json& extra) {
  auto j = prov.to_json();
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(artifact.string() + ".meta.json", std::ios::binary);
  if (!out) throw DataError("cannot write sidecar for " + artifact.string());
  out << j.dump(2) << '\n';
}

FittedModelSet train_models(const PanelDataset& panel, const RunConfig& cfg, MonthId train_end) {
  const auto train = restrict_months(panel, std::numeric_limits<MonthId>::min(), train_end);
  if (train.units.empty()) throw DataError("no training rows at or before month " + std::to_string(train_end));
  auto models = fit_model_set(train, cfg.fit_options());
  models.metadata.train_end_month = train_end;
  models.metadata.config_hash = cfg.hash();
  return models;
}

ForecastDraws forecast_omm(const FittedModelSet& models, const PanelDataset& panel, const RunConfig& cfg,
                           const ForecastWindow& window) {
  const MonthId cutoff = models.metadata.train_end_month;
  if (window.start <= cutoff)
    throw ValidationError("forecast window starts at month " + std::to_string(window.start) +
                          ", inside the model's training window ending at " + std::to_string(cutoff));
  if (panel.units.empty() || panel.last_month() < cutoff)
    throw DataError("panel has no feature data up to the model's training cutoff (month " + std::to_string(cutoff) +
                    ")");
  const auto history = restrict_months(panel, std::numeric_limits<MonthId>::min(), cutoff);
  SimulationConfig sim;
  sim.n_draws = cfg.n_draws;
  sim.window = window;
  sim.seed = derive_seed(cfg.seed, {fnv1a("simulate")});
  sim.threads = cfg.threads;
  return simulate_paths(models, history, sim);
}

std::vector<std::pair<std::string, ForecastDraws>> forecast_benchmarks(const PanelDataset& panel, MonthId train_end,
                                                                       const RunConfig& cfg,
                                                                       const ForecastWindow& window) {
  if (window.start <= train_end) throw ValidationError("benchmark window overlaps the training window");
  const auto history = restrict_months(panel, std::numeric_limits<MonthId>::min(), train_end);
  std::vector<std::pair<std::string, ForecastDraws>> out;
  for (auto kind : {BenchmarkKind::ExactlyZero, BenchmarkKind::LastPoisson, BenchmarkKind::Conflictology12,
                    BenchmarkKind::Boot240}) {
    BenchmarkSpec spec{kind, cfg.benchmark_draws, derive_seed(cfg.seed, {fnv1a("benchmark")})};
    out.emplace_back(std::string(to_string(kind)), run_benchmark(spec, history, window));
  }
  return out;
}

std::vector<MonthId> backtest_cutoffs(MonthId first_month, MonthId last_month, const BacktestSpec& spec) {
  if (spec.n_origins < 2) throw ValidationError("backtest.n_origins must be >= 2");
  std::vector<MonthId> cutoffs;
  for (int k = spec.n_origins - 1; k >= 0; --k) cutoffs.push_back(last_month - spec.horizon - k * spec.step);
  // Require two years of training history at the earliest origin.
  if (cutoffs.front() - first_month + 1 < 24)
    throw DataError("insufficient history for " + std::to_string(spec.n_origins) + " backtest origins: panel spans months " +
                    std::to_string(first_month) + ".." + std::to_string(last_month));
  return cutoffs;
}

BacktestResult run_backtest(const PanelDataset& panel, const RunConfig& cfg, std::vector<FittedModelSet>* fitted) {
  if (panel.units.empty()) throw DataError("backtest: empty panel");
  BacktestResult result;
  for (MonthId cutoff : backtest_cutoffs(panel.first_month(), panel.last_month(), cfg.backtest)) {
    OriginResult origin;
    origin.cutoff = cutoff;
    origin.window = {cutoff + 1, cfg.backtest.horizon};
    const auto actuals = restrict_months(panel, origin.window.start, origin.window.end());

    auto models = train_models(panel, cfg, cutoff);
    origin.reports.push_back(evaluate(forecast_omm(models, panel, cfg, origin.window), actuals, cfg.metrics, "omm"));
    for (const auto& [name, fd] : forecast_benchmarks(panel, cutoff, cfg, origin.window))
      origin.reports.push_back(evaluate(fd, actuals, cfg.metrics, name));
    result.origins.push_back(std::move(origin));
    if (fitted) fitted->push_back(std::move(models));
  }
  for (std::size_t m = 0; m < result.origins.front().reports.size(); ++m) {
    std::vector<MetricReport> per_origin;
    for (const auto& o : result.origins) per_origin.push_back(o.reports[m]);
    result.pooled.push_back(pool_reports(per_origin.front().model, per_origin));
  }
  return result;
}

void write_backtest_csv(std::ostream& out, const BacktestResult& result) {
  auto fmt = [](double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
  };
  auto row = [&](const std::string& origin, const MetricReport& r) {
    out << origin << ',' << r.model << ',' << r.overall.n_cells << ',' << fmt(r.overall.crps) << ','
        << fmt(r.overall.ign) << ',' << fmt(r.overall.mis) << ',' << fmt(r.overall.coverage) << '\n';
  };
  out << "origin,model,n_cells,crps,ign,mis,coverage\n";
  for (const auto& o : result.origins)
    for (const auto& r : o.reports) row(std::to_string(o.cutoff), r);
  for (const auto& r : result.pooled) row("pooled", r);
}

}  // namespace omm

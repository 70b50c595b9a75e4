#include "omm/benchmarks.hpp"

#include <algorithm>
#include <random>

#include "omm/errors.hpp"
#include "omm/rng.hpp"

namespace omm {

std::string_view to_string(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::ExactlyZero:
      return "exactly_zero";
    case BenchmarkKind::LastPoisson:
      return "last_poisson";
    case BenchmarkKind::Conflictology12:
      return "conflictology_12m";
    case BenchmarkKind::Boot240:
      return "boot_240";
  }
  return "?";
}

BenchmarkKind parse_benchmark_kind(std::string_view name) {
  for (auto k : {BenchmarkKind::ExactlyZero, BenchmarkKind::LastPoisson, BenchmarkKind::Conflictology12,
                 BenchmarkKind::Boot240})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown benchmark '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> unit_ids(const PanelDataset& panel) {
  std::vector<std::string> ids;
  for (const auto& u : panel.units) ids.push_back(u.id);
  return ids;
}

/// Observations of `unit` strictly before `month`: [begin, end) positions.
std::ptrdiff_t history_end(const UnitSeries& unit, MonthId month) {
  return std::lower_bound(unit.months.begin(), unit.months.end(), month) - unit.months.begin();
}

Rng unit_rng(std::uint64_t seed, std::string_view bench, const std::string& unit_id) {
  return Rng(derive_seed(seed, {fnv1a(bench), fnv1a(unit_id)}));
}

}  // namespace

ForecastDraws bench_exactly_zero(const PanelDataset& panel, const ForecastWindow& window, Index n_draws) {
  return make_forecast_draws(unit_ids(panel), window, n_draws);
}

ForecastDraws bench_last_poisson(const PanelDataset& panel, const ForecastWindow& window, Index n_draws,
                                 std::uint64_t seed) {
  auto fd = make_forecast_draws(unit_ids(panel), window, n_draws);
  const Index h = window.horizon;
  for (std::size_t u = 0; u < panel.units.size(); ++u) {
    const auto& unit = panel.units[u];
    const auto end = history_end(unit, window.start);
    if (end == 0) throw DataError("last_poisson: unit " + unit.id + " has no observation before the window");
    const Count lambda = unit.fatalities[static_cast<std::size_t>(end - 1)];
    if (lambda == 0) continue;
    Rng rng = unit_rng(seed, "last_poisson", unit.id);
    std::poisson_distribution<Count> poisson(static_cast<double>(lambda));
    for (Index k = 0; k < h; ++k)
      for (Index j = 0; j < n_draws; ++j) fd.values(static_cast<Index>(u) * h + k, j) = poisson(rng);
  }
  return fd;
}

ForecastDraws bench_conflictology(const PanelDataset& panel, const ForecastWindow& window, Index n_draws,
                                  int lookback, std::uint64_t seed) {
  if (lookback < 1) throw ValidationError("conflictology lookback must be >= 1");
  auto fd = make_forecast_draws(unit_ids(panel), window, n_draws);
  const Index h = window.horizon;
  const std::string tag = "conflictology_" + std::to_string(lookback);
  for (std::size_t u = 0; u < panel.units.size(); ++u) {
    const auto& unit = panel.units[u];
    const auto end = history_end(unit, window.start);
    if (end == 0) throw DataError("conflictology: unit " + unit.id + " has an empty lookback window");
    // Trailing window ends at the unit's last observation; shorter histories use everything.
    const MonthId first = unit.months[static_cast<std::size_t>(end - 1)] - lookback + 1;
    const auto begin = std::lower_bound(unit.months.begin(), unit.months.begin() + end, first) - unit.months.begin();
    const std::vector<Count> pool(unit.fatalities.begin() + begin, unit.fatalities.begin() + end);
    Rng rng = unit_rng(seed, tag, unit.id);
    for (Index k = 0; k < h; ++k)
      for (Index j = 0; j < n_draws; ++j)
        fd.values(static_cast<Index>(u) * h + k, j) = pool[uniform_index(rng, pool.size())];
  }
  return fd;
}

ForecastDraws run_benchmark(const BenchmarkSpec& spec, const PanelDataset& panel, const ForecastWindow& window) {
  switch (spec.kind) {
    case BenchmarkKind::ExactlyZero:
      return bench_exactly_zero(panel, window, spec.n_draws);
    case BenchmarkKind::LastPoisson:
      return bench_last_poisson(panel, window, spec.n_draws, spec.seed);
    case BenchmarkKind::Conflictology12:
      return bench_conflictology(panel, window, spec.n_draws, 12, spec.seed);
    case BenchmarkKind::Boot240:
      return bench_conflictology(panel, window, spec.n_draws, 240, spec.seed);
  }
  throw ValidationError("unknown benchmark kind");
}

}  // namespace omm

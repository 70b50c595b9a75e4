#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "omm/draws.hpp"
#include "omm/panel.hpp"

namespace omm {

enum class BenchmarkKind { ExactlyZero, LastPoisson, Conflictology12, Boot240 };

std::string_view to_string(BenchmarkKind kind);
BenchmarkKind parse_benchmark_kind(std::string_view name);

struct BenchmarkSpec {
  BenchmarkKind kind = BenchmarkKind::ExactlyZero;
  Index n_draws = 1000;
  std::uint64_t seed = 0;
};

// All benchmarks read only months before window.start and hold one
// distribution across the whole window.

ForecastDraws bench_exactly_zero(const PanelDataset& panel, const ForecastWindow& window, Index n_draws);

/// Poisson with lambda = each unit's last observed fatalities before the window.
ForecastDraws bench_last_poisson(const PanelDataset& panel, const ForecastWindow& window, Index n_draws,
                                 std::uint64_t seed);

/// Bootstrap of each unit's observed fatalities in the trailing `lookback` months.
ForecastDraws bench_conflictology(const PanelDataset& panel, const ForecastWindow& window, Index n_draws,
                                  int lookback, std::uint64_t seed);

ForecastDraws run_benchmark(const BenchmarkSpec& spec, const PanelDataset& panel, const ForecastWindow& window);

}  // namespace omm

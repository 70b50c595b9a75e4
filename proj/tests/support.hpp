#pragma once

#include <random>
#include <string>
#include <vector>

#include "omm/features.hpp"
#include "omm/panel.hpp"

namespace omm::testing {

/// Panel with one covariate "x" drawn i.i.d. N(0,1) and the given fatality series, months from 1.
inline PanelDataset make_panel(const std::vector<std::vector<Count>>& series, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  PanelDataset p;
  p.covariate_names = {"x"};
  for (std::size_t u = 0; u < series.size(); ++u) {
    UnitSeries s;
    s.id = "U" + std::to_string(u + 1);
    const auto n = series[u].size();
    s.fatalities = series[u];
    s.covariates.resize(static_cast<Index>(n), 1);
    for (std::size_t t = 0; t < n; ++t) {
      s.months.push_back(static_cast<MonthId>(t + 1));
      s.covariates(static_cast<Index>(t), 0) = normal(rng);
    }
    p.units.push_back(std::move(s));
  }
  return p;
}

inline std::vector<FeatureGroupSpec> x_group() { return {{"g", {"x"}, 1}}; }

}  // namespace omm::testing

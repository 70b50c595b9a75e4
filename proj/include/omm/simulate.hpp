#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "omm/draws.hpp"
#include "omm/markov.hpp"
#include "omm/rng.hpp"

namespace omm {

struct SimulationConfig {
  Index n_draws = 1000;
  ForecastWindow window;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// One simulated trajectory. Exogenous PC scores stay frozen at the last
/// observation; only the decay accumulator evolves with simulated fatalities.
struct PathState {
  MarkovState state = MarkovState::Peaceful;
  double decay = 0.0;
  Vector exogenous;
  Count last_fatalities = 0;
  MonthId month = 0;  // month of `state`

  /// Model input for the next step: exogenous scores followed by decay.
  Vector features() const;
};

struct UnitPaths {
  std::string unit_id;
  std::vector<PathState> paths;  // one per draw
};

/// Starting state of every (unit, draw) from each unit's last two observations
/// before the forecast window. Units need at least two observed months there.
std::vector<UnitPaths> init_paths(const FittedModelSet& models, const PanelDataset& history,
                                  const SimulationConfig& cfg);

struct StepResult {
  PathState path;
  Count fatalities = 0;
};

/// Draw the next state from the transition model, then fatalities from the
/// state's outcome forest (floored at 1), then update decay.
StepResult step_path(const FittedModelSet& models, const PathState& path, Rng& rng);

/// Per-path RNG: depends on (seed, unit id, draw index) only.
Rng path_rng(std::uint64_t seed, const std::string& unit_id, Index draw);

/// Simulated states aligned with ForecastDraws cells (cells x draws), plus the
/// starting states of every path.
struct StateTrace {
  std::vector<std::vector<MarkovState>> initial;  // [unit][draw]
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> states;
};

ForecastDraws simulate_paths(const FittedModelSet& models, const PanelDataset& history, const SimulationConfig& cfg,
                             StateTrace* trace = nullptr);

struct DrawSummary {
  CellKey cell;
  double mean = 0.0;
  double frac_zero = 0.0;
  std::vector<double> quantiles;
};

std::vector<DrawSummary> draws_summary(const ForecastDraws& fd, const std::vector<double>& quantiles);
void write_summary_csv(std::ostream& out, const std::vector<DrawSummary>& rows, const std::vector<double>& quantiles);

}  // namespace omm

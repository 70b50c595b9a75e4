#include "omm/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "omm/errors.hpp"
#include "omm/metrics.hpp"
#include "omm/parallel.hpp"

namespace omm {

void SimulationConfig::validate() const {
  if (n_draws < 1) throw ValidationError("simulation.n_draws must be >= 1");
  if (window.horizon < 1) throw ValidationError("simulation horizon must be >= 1");
}

Vector PathState::features() const {
  Vector x(exogenous.size() + 1);
  x.head(exogenous.size()) = exogenous;
  x(exogenous.size()) = decay;
  return x;
}

std::vector<UnitPaths> init_paths(const FittedModelSet& models, const PanelDataset& history,
                                  const SimulationConfig& cfg) {
  cfg.validate();
  std::vector<UnitPaths> out;
  out.reserve(history.units.size());
  for (const auto& unit : history.units) {
    const auto end = std::lower_bound(unit.months.begin(), unit.months.end(), cfg.window.start) - unit.months.begin();
    if (end < 2)
      throw DataError("unit " + unit.id + " has fewer than 2 observed months before month " +
                      std::to_string(cfg.window.start));
    const auto last = static_cast<std::size_t>(end - 1);
    const Count current = unit.fatalities[last];
    const Count previous = unit.months[last] - unit.months[last - 1] == 1 ? unit.fatalities[last - 1] : 0;

    PathState start;
    start.state = state_from_pair(previous, current);
    start.last_fatalities = current;
    start.month = unit.months[last];
    UnitSeries observed;
    observed.months.assign(unit.months.begin(), unit.months.begin() + end);
    observed.fatalities.assign(unit.fatalities.begin(), unit.fatalities.begin() + end);
    start.decay = decay_series(observed, models.pipeline.half_life).back();
    start.exogenous = models.pipeline.exogenous_row(unit.covariates.row(static_cast<Index>(last)).transpose(),
                                                    history.covariate_names);
    out.push_back({unit.id, std::vector<PathState>(static_cast<std::size_t>(cfg.n_draws), start)});
  }
  return out;
}

StepResult step_path(const FittedModelSet& models, const PathState& path, Rng& rng) {
  const Vector x = path.features();
  const auto p = transition_prob(models.transitions, path.state, x);
  const auto successors = allowed_successors(path.state);
  const MarkovState next = uniform01(rng) < p[1] ? successors.nonzero : successors.zero;

  Count fatalities = 0;
  if (!is_zero_state(next)) {
    const double draw = models.outcomes[next].forest.sample(x, rng);
    fatalities = std::max<Count>(1, std::llround(draw));
  }
  StepResult r{path, fatalities};
  r.path.state = next;
  r.path.decay = decay_step(path.decay, static_cast<double>(fatalities), models.pipeline.half_life);
  r.path.last_fatalities = fatalities;
  r.path.month = path.month + 1;
  return r;
}

Rng path_rng(std::uint64_t seed, const std::string& unit_id, Index draw) {
  return Rng(derive_seed(seed, {fnv1a(unit_id), static_cast<std::uint64_t>(draw)}));
}

ForecastDraws simulate_paths(const FittedModelSet& models, const PanelDataset& history, const SimulationConfig& cfg,
                             StateTrace* trace) {
  const auto starts = init_paths(models, history, cfg);
  std::vector<std::string> ids;
  for (const auto& u : starts) ids.push_back(u.unit_id);
  auto fd = make_forecast_draws(ids, cfg.window, cfg.n_draws);
  if (trace) {
    trace->initial.assign(starts.size(), {});
    trace->states.resize(fd.n_cells(), cfg.n_draws);
  }
  const Index horizon = cfg.window.horizon;

  parallel_for(starts.size(), cfg.threads, [&](std::size_t u) {
    const auto& unit = starts[u];
    if (trace) trace->initial[u].resize(unit.paths.size());
    for (std::size_t d = 0; d < unit.paths.size(); ++d) {
      Rng rng = path_rng(cfg.seed, unit.unit_id, static_cast<Index>(d));
      PathState path = unit.paths[d];
      if (trace) trace->initial[u][d] = path.state;
      while (path.month < cfg.window.end()) {
        auto step = step_path(models, path, rng);
        path = std::move(step.path);
        if (path.month >= cfg.window.start) {
          const Index cell = static_cast<Index>(u) * horizon + (path.month - cfg.window.start);
          fd.values(cell, static_cast<Index>(d)) = step.fatalities;
          if (trace) trace->states(cell, static_cast<Index>(d)) = static_cast<std::uint8_t>(path.state);
        }
      }
    }
  });
  return fd;
}

std::vector<DrawSummary> draws_summary(const ForecastDraws& fd, const std::vector<double>& quantiles) {
  for (double q : quantiles)
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("summary quantiles must lie in [0, 1]");
  std::vector<DrawSummary> rows;
  rows.reserve(fd.cells.size());
  std::vector<double> x(static_cast<std::size_t>(fd.n_draws()));
  for (Index c = 0; c < fd.n_cells(); ++c) {
    DrawSummary s;
    s.cell = fd.cells[static_cast<std::size_t>(c)];
    Index zeros = 0;
    for (Index j = 0; j < fd.n_draws(); ++j) {
      x[static_cast<std::size_t>(j)] = static_cast<double>(fd.values(c, j));
      zeros += fd.values(c, j) == 0;
    }
    std::sort(x.begin(), x.end());
    double total = 0.0;
    for (double v : x) total += v;
    s.mean = total / static_cast<double>(x.size());
    s.frac_zero = static_cast<double>(zeros) / static_cast<double>(x.size());
    for (double q : quantiles) s.quantiles.push_back(empirical_quantile(x, q));
    rows.push_back(std::move(s));
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<DrawSummary>& rows, const std::vector<double>& quantiles) {
  auto fmt = [](double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
  };
  out << "unit_id,month_id,mean,frac_zero";
  for (double q : quantiles) out << ",q" << fmt(q);
  out << '\n';
  for (const auto& r : rows) {
    out << r.cell.unit_id << ',' << r.cell.month << ',' << fmt(r.mean) << ',' << fmt(r.frac_zero);
    for (double v : r.quantiles) out << ',' << fmt(v);
    out << '\n';
  }
}

}  // namespace omm

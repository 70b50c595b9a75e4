#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "omm/errors.hpp"
#include "omm/simulate.hpp"
#include "support.hpp"

using namespace omm;
using omm::testing::make_panel;
using omm::testing::x_group;
using S = MarkovState;

namespace {

QuantileForest constant_qrf(double value) {
  Matrix X = Matrix::Random(20, 2);
  std::vector<double> y(20, value);
  auto h = ForestHyperparams::regressor_defaults();
  h.n_trees = 5;
  return fit_qrf(X, y, h);
}

/// Fallback-only transitions with fixed nonzero-successor rates and constant outcome forests.
FittedModelSet hand_models(const PanelDataset& panel, std::array<double, 4> rates, double outcome = 7.0) {
  FittedModelSet m;
  m.pipeline = fit_feature_pipeline(panel, x_group(), 12.0);
  for (auto s : kAllStates) {
    auto& t = m.transitions.models[static_cast<std::size_t>(s)];
    t.origin = s;
    t.fallback_rate = rates[static_cast<std::size_t>(s)];
  }
  m.outcomes.escalation.forest = constant_qrf(outcome);
  m.outcomes.war.forest = constant_qrf(outcome);
  return m;
}

SimulationConfig sim(MonthId start, int horizon, Index draws, std::uint64_t seed = 1) {
  SimulationConfig cfg;
  cfg.window = {start, horizon};
  cfg.n_draws = draws;
  cfg.seed = seed;
  return cfg;
}

FittedModelSet fitted_synth_models(const PanelDataset& panel) {
  ModelFitOptions opt;
  opt.classifier.n_trees = 40;
  opt.regressor.n_trees = 40;
  opt.seed = 17;
  return fit_model_set(panel, opt);
}

PanelDataset conflict_synth(int units, int months) {
  SynthConfig cfg;
  cfg.n_units = units;
  cfg.n_months = months;
  cfg.initial_conflict_share = 0.4;
  cfg.p_escalate = 0.1;
  cfg.signal_effect = 1.0;
  return synth_panel(cfg, 23);
}

}  // namespace

TEST_CASE("init_paths") {
  std::vector<std::vector<Count>> series(10, std::vector<Count>(12, 0));
  series[1][10] = 4;
  series[1][11] = 9;
  series[2][11] = 3;
  series[3][10] = 2;
  const auto panel = make_panel(series);
  const auto models = hand_models(panel, {0.1, 0.5, 0.5, 0.1});
  const auto paths = init_paths(models, panel, sim(13, 6, 1000));
  REQUIRE(paths.size() == 10);
  std::size_t total = 0;
  for (const auto& u : paths) total += u.paths.size();
  CHECK(total == 10000);
  CHECK(paths[0].paths[0].state == S::Peaceful);
  CHECK(paths[1].paths[999].state == S::War);
  CHECK(paths[2].paths[0].state == S::Escalation);
  CHECK(paths[3].paths[0].state == S::DeEscalation);
  CHECK(paths[1].paths[0].decay == doctest::Approx(9.0 + 4.0 * std::exp2(-1.0 / 12.0)));
  CHECK(paths[1].paths[0].month == 12);
  CHECK(paths[0].paths[0].exogenous.size() == 1);

  CHECK_THROWS_AS(init_paths(models, panel, sim(2, 6, 10)), DataError);
  CHECK_THROWS_AS(init_paths(models, panel, sim(13, 6, 0)), ValidationError);
}

TEST_CASE("step_path") {
  const auto panel = make_panel({std::vector<Count>(12, 0)});
  Rng rng(4);
  PathState start;
  start.exogenous = Vector::Zero(1);
  start.decay = 24.0;
  start.month = 12;

  SUBCASE("forced peace") {
    const auto models = hand_models(panel, {0.0, 0.0, 0.0, 0.0});
    start.state = S::Peaceful;
    const auto r = step_path(models, start, rng);
    CHECK(r.path.state == S::Peaceful);
    CHECK(r.fatalities == 0);
    CHECK(r.path.month == 13);
    CHECK(r.path.decay == doctest::Approx(24.0 * std::exp2(-1.0 / 12.0)));
  }
  SUBCASE("constant outcome forest") {
    const auto models = hand_models(panel, {1.0, 1.0, 1.0, 1.0});
    start.state = S::Peaceful;
    const auto r = step_path(models, start, rng);
    CHECK(r.path.state == S::Escalation);
    CHECK(r.fatalities == 7);
    CHECK(r.path.last_fatalities == 7);
    CHECK(r.path.decay == doctest::Approx(24.0 * std::exp2(-1.0 / 12.0) + 7.0));
    const auto r2 = step_path(models, r.path, rng);
    CHECK(r2.path.state == S::War);
  }
  SUBCASE("nonzero states are floored at one") {
    const auto models = hand_models(panel, {1.0, 1.0, 1.0, 1.0}, 0.4);
    start.state = S::War;
    const auto r = step_path(models, start, rng);
    CHECK(r.path.state == S::War);
    CHECK(r.fatalities == 1);
  }
}

TEST_CASE("simulate_paths with hand models") {
  std::vector<std::vector<Count>> series(4, std::vector<Count>(24, 0));
  series[2][23] = 5;
  const auto panel = make_panel(series);

  SUBCASE("absorbing peace gives zero draws") {
    auto quiet = make_panel(std::vector<std::vector<Count>>(4, std::vector<Count>(24, 0)));
    const auto fd = simulate_paths(hand_models(quiet, {0.0, 0.5, 0.5, 0.0}), quiet, sim(25, 12, 200));
    CHECK(fd.n_cells() == 48);
    CHECK(fd.values.maxCoeff() == 0);
  }
  SUBCASE("gap between history and window is stepped through") {
    const auto models = hand_models(panel, {1.0, 1.0, 1.0, 1.0});
    const auto fd = simulate_paths(models, panel, sim(28, 3, 5));
    CHECK(fd.n_cells() == 12);
    CHECK(fd.cells.front().month == 28);
    CHECK(fd.values.minCoeff() == 7);
  }
}

TEST_CASE("simulate_paths with fitted models") {
  const auto full = conflict_synth(20, 84);
  const auto history = restrict_months(full, full.first_month(), 72);
  const auto models = fitted_synth_models(history);

  SUBCASE("deterministic and thread independent") {
    auto cfg = sim(73, 12, 300, 99);
    const auto a = simulate_paths(models, history, cfg);
    const auto b = simulate_paths(models, history, cfg);
    cfg.threads = 4;
    const auto c = simulate_paths(models, history, cfg);
    CHECK(a.values == b.values);
    CHECK(a.values == c.values);
    CHECK(a.cells == c.cells);
    cfg.seed = 100;
    CHECK(simulate_paths(models, history, cfg).values != a.values);
  }

  SUBCASE("first-step frequency matches transition_prob") {
    StateTrace trace;
    const auto cfg = sim(73, 1, 10000, 5);
    const auto fd = simulate_paths(models, history, cfg, &trace);
    const auto starts = init_paths(models, history, cfg);
    for (std::size_t u = 0; u < starts.size(); ++u) {
      const auto& p0 = starts[u].paths[0];
      const double p = transition_prob(models.transitions, p0.state, p0.features())[1];
      const auto row = fd.values.row(static_cast<Index>(u));
      const double freq = static_cast<double>((row.array() > 0).count()) / static_cast<double>(cfg.n_draws);
      CHECK(std::abs(freq - p) <= 0.02);
    }
  }

  SUBCASE("legality and zero coupling") {
    StateTrace trace;
    const auto cfg = sim(73, 12, 1000, 8);
    const auto fd = simulate_paths(models, history, cfg, &trace);
    Index transitions = 0, violations = 0, coupling = 0;
    for (std::size_t u = 0; u < trace.initial.size(); ++u) {
      for (Index d = 0; d < cfg.n_draws; ++d) {
        auto prev = trace.initial[u][static_cast<std::size_t>(d)];
        for (Index h = 0; h < 12; ++h) {
          const Index cell = static_cast<Index>(u) * 12 + h;
          const auto s = static_cast<S>(trace.states(cell, d));
          ++transitions;
          violations += !is_legal_transition(prev, s);
          coupling += is_zero_state(s) != (fd.values(cell, d) == 0);
          prev = s;
        }
      }
    }
    CHECK(transitions >= 10000);
    CHECK(violations == 0);
    CHECK(coupling == 0);
    CHECK(fd.values.maxCoeff() > 0);
  }

  SUBCASE("decay bookkeeping") {
    const auto cfg = sim(73, 24, 20, 3);
    const auto starts = init_paths(models, history, cfg);
    for (std::size_t u = 0; u < starts.size(); ++u) {
      const auto* unit = history.find(starts[u].unit_id);
      for (Index d = 0; d < cfg.n_draws; ++d) {
        auto rng = path_rng(cfg.seed, unit->id, d);
        auto path = starts[u].paths[static_cast<std::size_t>(d)];
        std::vector<Count> f = unit->fatalities;
        for (int h = 0; h < 24; ++h) {
          auto step = step_path(models, path, rng);
          path = step.path;
          f.push_back(step.fatalities);
        }
        const double direct = decay_feature<Count>(f, models.pipeline.half_life).back();
        CHECK(std::abs(path.decay - direct) <= 1e-9 * std::max(1.0, direct));
      }
    }
  }

  SUBCASE("runtime scales linearly with workload") {
    auto time_of = [&](Index draws, int horizon, std::size_t units) {
      auto sub = history;
      sub.units.resize(units);
      const auto t0 = std::chrono::steady_clock::now();
      simulate_paths(models, sub, sim(73, horizon, draws, 2));
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    time_of(50, 6, 5);  // warm-up
    const double base = time_of(200, 6, 5);
    const double scaled = time_of(400, 12, 10);
    const double ratio = scaled / (8.0 * base);
    MESSAGE("per-unit-of-work time ratio " << ratio);
    CHECK(ratio >= 1.0 / 3.0);
    CHECK(ratio <= 3.0);
  }
}

TEST_CASE("draws_summary") {
  ForecastDraws fd;
  fd.cells = {{"A", 1}, {"A", 2}, {"A", 3}};
  fd.values = CountMatrix::Zero(3, 1000);
  fd.values(1, 999) = 100;
  for (Index j = 0; j < 1000; ++j) fd.values(2, j) = j + 1;
  const std::vector<double> qs{0.05, 0.5, 0.95};
  const auto rows = draws_summary(fd, qs);
  CHECK(rows[0].frac_zero == 1.0);
  for (double v : rows[0].quantiles) CHECK(v == 0.0);
  CHECK(rows[1].quantiles[1] == 0.0);
  CHECK(rows[1].mean == doctest::Approx(0.1));
  CHECK(std::abs(rows[2].quantiles[1] - 500.0) <= 1.0);
  CHECK(rows[2].mean == doctest::Approx(500.5));
  CHECK(rows[2].frac_zero == 0.0);
  CHECK_THROWS_AS(draws_summary(fd, {1.5}), ValidationError);

  std::ostringstream os;
  write_summary_csv(os, rows, qs);
  CHECK(os.str().rfind("unit_id,month_id,mean,frac_zero,q0.05,q0.5,q0.95\nA,1,0,1,0,0,0\n", 0) == 0);
}

TEST_CASE("draws csv round trip") {
  ForecastDraws fd = make_forecast_draws({"A", "B"}, {5, 2}, 3);
  for (Index i = 0; i < fd.values.size(); ++i) fd.values.data()[i] = i * 3;
  std::stringstream ss;
  write_draws_csv(ss, fd);
  const auto back = read_draws_csv(ss);
  CHECK(back.cells == fd.cells);
  CHECK(back.values == fd.values);
  fd.values(0, 0) = -1;
  CHECK_THROWS_AS(check_draws(fd), DataError);
}

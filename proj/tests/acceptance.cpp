// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "omm/benchmarks.hpp"
#include "omm/metrics.hpp"
#include "omm/pipeline.hpp"
#include "omm/simulate.hpp"

using namespace omm;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::ostringstream failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures << (failures.tellp() > 0 ? ", " : "") << what;
    }
  }
};

double crps_brute(const Vector& x, double y) {
  const double m = static_cast<double>(x.size());
  double a = 0.0, b = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    a += std::abs(x(i) - y);
    for (Index j = 0; j < x.size(); ++j) b += std::abs(x(i) - x(j));
  }
  return a / m - b / (2.0 * m * m);
}

double decay_direct(const std::vector<Count>& f, std::size_t t, double half_life) {
  double s = 0.0;
  for (std::size_t k = 0; k <= t; ++k) s += static_cast<double>(f[k]) * std::pow(2.0, -static_cast<double>(t - k) / half_life);
  return s;
}

ModelFitOptions quick_fit(int trees, std::uint64_t seed) {
  ModelFitOptions o;
  o.classifier.n_trees = trees;
  o.regressor.n_trees = trees;
  o.seed = seed;
  return o;
}

SynthConfig conflict_synth(int units, int months) {
  SynthConfig cfg;
  cfg.n_units = units;
  cfg.n_months = months;
  cfg.initial_conflict_share = 0.3;
  cfg.signal_effect = 1.0;
  return cfg;
}

// 1. State machine: encoding table and simulated legality / zero coupling.
Outcome criterion_state_machine() {
  Outcome r;
  for (Count prev : {0, 3})
    for (Count cur : {0, 5}) {
      const std::vector<Count> f{prev, cur};
      const MarkovState expected = prev == 0 ? (cur == 0 ? MarkovState::Peaceful : MarkovState::Escalation)
                                             : (cur == 0 ? MarkovState::DeEscalation : MarkovState::War);
      r.require(encode_states(f).front() == expected, "encode_states pattern");
    }

  const auto panel = synth_panel(conflict_synth(20, 96), 101);
  const auto history = restrict_months(panel, panel.first_month(), 84);
  const auto models = fit_model_set(history, quick_fit(100, 5));
  SimulationConfig sim;
  sim.n_draws = 1000;
  sim.window = {85, 12};
  sim.seed = 9;
  StateTrace trace;
  const auto fd = simulate_paths(models, history, sim, &trace);

  Index transitions = 0, illegal = 0, coupling = 0;
  for (std::size_t u = 0; u < trace.initial.size(); ++u)
    for (Index d = 0; d < sim.n_draws; ++d) {
      MarkovState prev = trace.initial[u][static_cast<std::size_t>(d)];
      for (Index h = 0; h < sim.window.horizon; ++h) {
        const Index cell = static_cast<Index>(u) * sim.window.horizon + h;
        const auto s = static_cast<MarkovState>(trace.states(cell, d));
        ++transitions;
        illegal += !is_legal_transition(prev, s);
        coupling += is_zero_state(s) != (fd.values(cell, d) == 0);
        prev = s;
      }
    }
  r.require(transitions >= 10000, "at least 10000 transitions");
  r.require(illegal == 0, "no illegal transitions");
  r.require(coupling == 0, "no zero-coupling violations");
  r.detail << transitions << " simulated transitions, " << illegal << " illegal, " << coupling
           << " zero-coupling violations";
  return r;
}

// 2. Decay: recursion against the direct weighted sum, plus half-life spot values.
Outcome criterion_decay() {
  Outcome r;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 500);
  std::bernoulli_distribution active(0.3);
  std::geometric_distribution<int> size(0.005);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Count> f(static_cast<std::size_t>(len(rng)));
    for (auto& v : f) v = active(rng) ? size(rng) : 0;
    const auto d = decay_feature<Count>(f, 12.0);
    for (std::size_t t = 0; t < f.size(); ++t) {
      const double oracle = decay_direct(f, t, 12.0);
      if (oracle > 0.0) worst = std::max(worst, std::abs(d[t] - oracle) / oracle);
      else r.require(d[t] == 0.0, "zero history gives zero decay");
    }
  }
  r.require(worst <= 1e-9, "relative error <= 1e-9");

  std::vector<Count> lag(25, 0);
  lag[0] = 100;
  const auto d = decay_feature<Count>(lag, 12.0);
  const double at12 = d[12], at24 = d[24];
  r.require(std::abs(at12 - 50.0) <= 1e-12, "lag 12 gives 50");
  r.require(std::abs(at24 - 25.0) <= 1e-12, "lag 24 gives 25");
  r.detail.precision(17);
  r.detail << "max relative error " << worst << " over 100 sequences; lag12 " << at12 << ", lag24 " << at24;
  return r;
}

// 3. Scoring rules against brute-force and hand values.
Outcome criterion_scoring() {
  Outcome r;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(1, 200);
  std::geometric_distribution<int> g(0.05);
  double worst = 0.0;
  Index single_mismatch = 0, mis_violations = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    Vector x(size(rng));
    for (auto& v : x) v = g(rng);
    const double y = g(rng);
    const double brute = crps_brute(x, y);
    worst = std::max(worst, std::abs(crps_sample(x, y) - brute) / std::max(1.0, brute));
    single_mismatch += crps_sample(x.head(1), y) != std::abs(x(0) - y);

    const auto [l, u] = central_interval(x, 0.1);
    const double s = mis(x, y, 0.1);
    const bool covered = y >= l && y <= u;
    mis_violations += s < u - l;
    mis_violations += covered != (s == u - l);
  }
  r.require(worst <= 1e-9, "CRPS matches brute force");
  r.require(single_mismatch == 0, "single-draw CRPS equals absolute error");
  r.require(mis_violations == 0, "MIS penalty identities");

  const double ign = ign_binned(Vector::Zero(1000), 7.0, IgnBinning{});
  r.require(std::abs(ign - 9.965784284662087) <= 1e-6, "IGN floor value");
  r.detail.precision(10);
  r.detail << "max CRPS deviation " << worst << " over 1000 cases; IGN at floor " << ign;
  return r;
}

// 4. Quantile regression forest fidelity.
Outcome criterion_qrf() {
  Outcome r;
  std::mt19937_64 rng(4);
  std::geometric_distribution<int> g(0.02);

  // Single tree, single leaf: quantiles are the inverse empirical CDF of the targets.
  {
    const Index n = 257;
    Matrix X = Matrix::Zero(n, 1);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = 1 + g(rng);
    ForestHyperparams h;
    h.n_trees = 1;
    h.bootstrap = false;
    h.min_leaf_size = static_cast<int>(n);
    const auto f = fit_qrf(X, y, h);
    auto sorted = y;
    std::sort(sorted.begin(), sorted.end());
    Index mismatches = 0;
    for (int k = 0; k <= 1000; ++k) {
      const double q = k / 1000.0;
      const auto idx = std::max<Index>(1, static_cast<Index>(std::ceil((q - 1e-12) * static_cast<double>(n))));
      mismatches += f.quantile(Vector::Zero(1), q) != sorted[static_cast<std::size_t>(idx - 1)];
    }
    r.require(mismatches == 0, "single-leaf quantiles equal empirical quantiles");
    r.detail << "single-leaf mismatches " << mismatches << "; ";
  }

  auto random_forest = [&](std::uint64_t seed, int trees) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix X(300, 3);
    std::vector<double> y(300);
    for (Index i = 0; i < 300; ++i) {
      for (Index c = 0; c < 3; ++c) X(i, c) = u(gen);
      y[static_cast<std::size_t>(i)] = 1 + std::floor(std::exp(3.0 * X(i, 0) + u(gen)));
    }
    auto h = ForestHyperparams::regressor_defaults();
    h.n_trees = trees;
    h.seed = seed;
    return fit_qrf(X, y, h);
  };

  // Sampling against the exact weighted CDF.
  {
    const auto f = random_forest(99, 200);
    Vector x(3);
    x << 0.6, 0.4, 0.5;
    const Vector w = f.weights(x);
    Rng sampler(123);
    std::vector<double> draws(10000);
    for (auto& d : draws) d = f.sample(x, sampler);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0, cdf = 0.0;
    for (Index k = 0; k < f.support.size(); ++k) {
      const double before = static_cast<double>(std::lower_bound(draws.begin(), draws.end(), f.support(k)) - draws.begin()) / 1e4;
      ks = std::max(ks, std::abs(before - cdf));
      cdf += w(k);
      const double after = static_cast<double>(std::upper_bound(draws.begin(), draws.end(), f.support(k)) - draws.begin()) / 1e4;
      ks = std::max(ks, std::abs(after - cdf));
    }
    r.require(ks <= 0.03, "Kolmogorov distance <= 0.03");
    r.detail << "sampling KS distance " << ks << "; ";
  }

  // Monotone quantiles over a 99-point grid for 100 fitted forests.
  Index violations = 0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const auto f = random_forest(1000 + static_cast<std::uint64_t>(k), 20);
    Vector x(3);
    x << u(rng), u(rng), u(rng);
    double prev = -std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 99; ++j) {
      const double v = f.quantile(x, j / 100.0);
      violations += v < prev;
      prev = v;
    }
  }
  r.require(violations == 0, "quantile monotonicity");
  r.detail << "monotonicity violations " << violations << " over 100 forests";
  return r;
}

// 5. Peaceful-origin classifier on a panel with a planted escalation driver.
Outcome criterion_classifier() {
  Outcome r;
  SynthConfig cfg;
  cfg.n_units = 50;
  cfg.n_months = 120;
  cfg.p_escalate = 0.5;
  cfg.p_reescalate = 0.5;
  cfg.signal_effect = 2.0;
  cfg.covariate_noise = 0.3;
  cfg.groups = {{"driver", 1, 1}, {"noise", 2, 0}};
  const auto panel = synth_panel(cfg, 55);

  auto opt = quick_fit(300, 8);
  opt.groups = {{"driver", {"driver_1"}, 1}, {"noise", {"noise_1", "noise_2"}, 1}};
  const auto models = fit_model_set(panel, opt);
  const auto& peaceful = models.transitions[MarkovState::Peaceful];
  r.require(!peaceful.is_fallback(), "Peaceful origin has a classifier");
  if (peaceful.is_fallback()) return r;

  const double oob = peaceful.classifier->oob_accuracy;
  // Features: driver PC, noise PC, decay. A single standardized column makes the driver PC unit-variance.
  Vector hi = Vector::Zero(3), lo = Vector::Zero(3);
  hi(0) = 2.0;
  lo(0) = -2.0;
  const double p_hi = transition_prob(models.transitions, MarkovState::Peaceful, hi)[1];
  const double p_lo = transition_prob(models.transitions, MarkovState::Peaceful, lo)[1];
  r.require(oob >= 0.7, "OOB accuracy >= 0.7");
  r.require(p_hi > p_lo, "P(escalate | +2 SD) > P(escalate | -2 SD)");
  r.detail << "OOB accuracy " << oob << " on " << peaceful.n_rows << " rows (base rate "
           << static_cast<double>(peaceful.n_positive) / static_cast<double>(peaceful.n_rows) << "); P(+2 SD) " << p_hi
           << ", P(-2 SD) " << p_lo;
  return r;
}

// 6. End-to-end recovery on a known generator with a 3-origin backtest.
Outcome criterion_recovery() {
  Outcome r;
  RunConfig cfg;
  cfg.seed = 42;
  cfg.synth.n_units = 50;
  cfg.synth.n_months = 180;
  cfg.synth.initial_conflict_share = 0.3;
  cfg.backtest = {3, 12, 12};
  const auto panel = synth_panel(cfg.synth, cfg.seed);
  std::vector<FittedModelSet> fitted;
  const auto result = run_backtest(panel, cfg, &fitted);

  Index cells = 0, nonzero = 0;
  for (const auto& o : result.origins)
    for (const auto& c : o.reports.front().cells) {
      ++cells;
      nonzero += c.actual > 0;
    }
  const double nonzero_share = static_cast<double>(nonzero) / static_cast<double>(cells);
  const auto& omm = result.pooled[0];
  const auto& zero = result.pooled[1];
  r.require(omm.model == "omm" && zero.model == "exactly_zero", "report order");
  const bool enough_conflict = nonzero_share >= 0.10;
  const bool a = enough_conflict && omm.overall.crps <= zero.overall.crps;
  const bool b = omm.overall.coverage >= 0.80 && omm.overall.coverage <= 0.97;

  // Neutral covariates: every PC at its training mean (0) and no conflict history (decay 0).
  bool c = true;
  std::ostringstream neutral_p, held_out;
  for (std::size_t k = 0; k < result.origins.size(); ++k) {
    const auto& o = result.origins[k];
    const auto& models = fitted[k];
    const Vector neutral = Vector::Zero(models.pipeline.n_features());
    const double p = transition_prob(models.transitions, MarkovState::Peaceful, neutral)[1];
    c = c && std::abs(p - cfg.synth.p_escalate) <= 0.03;
    neutral_p << (k ? ", " : "") << p;

    // Diagnostic only: mean fitted probability over the window's held-out Peaceful origins.
    const auto fm = build_feature_matrix(panel, models.pipeline);
    double sum = 0.0;
    Index n = 0;
    for (std::size_t u = 0; u < panel.units.size(); ++u) {
      const auto& unit = panel.units[u];
      for (std::size_t t = 1; t < unit.months.size(); ++t) {
        if (!o.window.contains(unit.months[t]) || unit.fatalities[t] != 0 || unit.fatalities[t - 1] != 0) continue;
        sum += transition_prob(models.transitions, MarkovState::Peaceful,
                               fm.values.row(fm.unit_offset[u] + static_cast<Index>(t)).transpose())[1];
        ++n;
      }
    }
    held_out << (k ? ", " : "") << sum / static_cast<double>(n);
  }
  r.require(enough_conflict, "(a) needs >= 10% nonzero cells");
  r.require(a, "(a)");
  r.require(b, "(b)");
  r.require(c, "(c)");
  auto mark = [](bool ok) { return ok ? "ok" : "FAIL"; };
  r.detail << "(a) " << mark(a) << ": nonzero cells " << nonzero_share << ", CRPS omm " << omm.overall.crps
           << " vs exactly_zero " << zero.overall.crps << "; (b) " << mark(b) << ": coverage "
           << omm.overall.coverage << "; (c) " << mark(c) << ": P(escalate | neutral) per origin " << neutral_p.str()
           << " vs generator " << cfg.synth.p_escalate << " +/- 0.03 (diagnostic: mean over held-out Peaceful rows "
           << held_out.str() << ")";
  return r;
}

// 7. Benchmarks.
Outcome criterion_benchmarks() {
  Outcome r;
  const auto panel = synth_panel(conflict_synth(30, 300), 7);
  const ForecastWindow window{289, 12};

  const auto zero = bench_exactly_zero(panel, window, 1000);
  r.require(zero.values.maxCoeff() == 0 && zero.values.minCoeff() == 0, "exactly_zero emits zeros");

  std::vector<Count> f(24, 0);
  f.back() = 100;
  PanelDataset single;
  single.covariate_names = {"x"};
  UnitSeries u;
  u.id = "P";
  u.fatalities = f;
  u.covariates = Matrix::Zero(24, 1);
  for (int m = 1; m <= 24; ++m) u.months.push_back(m);
  single.units.push_back(u);
  const auto poisson = bench_last_poisson(single, {25, 1}, 100000, 3);
  const double mean = poisson.values.cast<double>().mean();
  const double sigma = std::sqrt(100.0 / 1e5);
  r.require(std::abs(mean - 100.0) <= 3.0 * sigma, "Poisson mean within 3 sigma");

  Index outside = 0;
  for (int lookback : {12, 240}) {
    const auto fd = bench_conflictology(panel, window, 1000, lookback, 11);
    for (std::size_t k = 0; k < panel.units.size(); ++k) {
      const auto& unit = panel.units[k];
      std::set<Count> trailing;
      for (std::size_t t = 0; t < unit.months.size(); ++t)
        if (unit.months[t] < window.start && unit.months[t] >= window.start - lookback) trailing.insert(unit.fatalities[t]);
      for (Index h = 0; h < window.horizon; ++h)
        for (Index j = 0; j < fd.n_draws(); ++j)
          outside += !trailing.contains(fd.values(static_cast<Index>(k) * window.horizon + h, j));
    }
  }
  r.require(outside == 0, "conflictology support within trailing values");
  r.detail << "Poisson mean " << mean << " (3 sigma = " << 3.0 * sigma << "); draws outside trailing support "
           << outside;
  return r;
}

// 8. Reproducibility and cutoff leakage.
Outcome criterion_reproducibility() {
  Outcome r;
  RunConfig cfg;
  cfg.seed = 2718;
  cfg.classifier.n_trees = 100;
  cfg.regressor.n_trees = 100;
  cfg.n_draws = 500;
  cfg.benchmark_draws = 500;
  const auto panel = synth_panel(conflict_synth(30, 120), cfg.seed);
  const MonthId cutoff = 108;
  const ForecastWindow window{cutoff + 1, 12};

  auto draw_file = [&](const PanelDataset& p, int threads) {
    auto c = cfg;
    c.threads = threads;
    const auto models = train_models(p, c, cutoff);
    std::ostringstream os;
    write_draws_csv(os, forecast_omm(models, p, c, window));
    for (const auto& [name, fd] : forecast_benchmarks(p, cutoff, c, window)) write_draws_csv(os, fd);
    return os.str();
  };
  const auto first = draw_file(panel, 1);
  r.require(first == draw_file(panel, 1), "identical reruns");
  r.require(first == draw_file(panel, 4), "identical with 4 threads");

  auto appended = restrict_months(panel, panel.first_month(), cutoff);
  std::mt19937_64 rng(5);
  std::geometric_distribution<int> g(0.01);
  for (auto& u : appended.units) {
    const Index n = u.size();
    Matrix cov(n + 24, u.covariates.cols());
    cov.topRows(n) = u.covariates;
    for (int m = 1; m <= 24; ++m) {
      u.months.push_back(cutoff + m);
      u.fatalities.push_back(g(rng));
      cov.row(n + m - 1).setConstant(static_cast<double>(m));
    }
    u.covariates = cov;
  }
  const auto truncated = restrict_months(panel, panel.first_month(), cutoff);
  const auto base = draw_file(truncated, 1);
  r.require(base == draw_file(appended, 1), "appending post-cutoff rows changes nothing");
  r.require(base == first, "rows after the cutoff are ignored");
  r.detail << "draw files " << first.size() << " bytes, identical across reruns, threads and appended rows";
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"state machine", criterion_state_machine},
      {"decay feature", criterion_decay},
      {"scoring rules", criterion_scoring},
      {"QRF fidelity", criterion_qrf},
      {"classifier sanity", criterion_classifier},
      {"end-to-end recovery", criterion_recovery},
      {"benchmarks", criterion_benchmarks},
      {"reproducibility", criterion_reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !r.pass;
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (r.pass ? "PASS" : "FAIL");
    if (!r.pass) std::cout << " [failed: " << r.failures.str() << "]";
    std::cout << "; " << r.detail.str() << " [" << secs << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

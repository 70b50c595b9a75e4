#include "omm/config.hpp"

#include <fstream>
#include <set>

#include "omm/errors.hpp"
#include "omm/rng.hpp"

namespace omm {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.contains(k)) throw ValidationError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config field " + where + "." + key + ": " + e.what());
  }
}

ForestHyperparams parse_forest(const json& j, ForestHyperparams h, const std::string& where, bool* log_target) {
  std::set<std::string> keys{"n_trees", "max_features", "min_leaf_size", "max_depth", "bootstrap"};
  if (log_target) keys.insert("log_target");
  check_keys(j, where, keys);
  read(j, "n_trees", h.n_trees, where);
  read(j, "min_leaf_size", h.min_leaf_size, where);
  read(j, "bootstrap", h.bootstrap, where);
  if (j.contains("max_depth")) {
    const auto& d = j.at("max_depth");
    if (d.is_null()) h.max_depth.reset();
    else if (d.is_number_integer()) h.max_depth = d.get<int>();
    else throw ValidationError("config field " + where + ".max_depth must be an integer or null");
  }
  if (j.contains("max_features")) {
    const auto& m = j.at("max_features");
    if (m.is_null()) h.max_features = {};
    else if (m.is_number_integer()) h.max_features = MaxFeatures::count(m.get<int>());
    else if (m.is_number_float()) h.max_features = MaxFeatures::fraction(m.get<double>());
    else throw ValidationError("config field " + where + ".max_features must be an integer, a fraction or null");
  }
  if (log_target) read(j, "log_target", *log_target, where);
  return h;
}

json forest_json(const ForestHyperparams& h) {
  json j;
  j["n_trees"] = h.n_trees;
  j["min_leaf_size"] = h.min_leaf_size;
  j["bootstrap"] = h.bootstrap;
  j["max_depth"] = h.max_depth ? json(*h.max_depth) : json(nullptr);
  switch (h.max_features.kind) {
    case MaxFeatures::Kind::Default:
      j["max_features"] = nullptr;
      break;
    case MaxFeatures::Kind::Count:
      j["max_features"] = static_cast<int>(h.max_features.value);
      break;
    case MaxFeatures::Kind::Fraction:
      j["max_features"] = h.max_features.value;
      break;
  }
  return j;
}

SynthConfig parse_synth(const json& j) {
  SynthConfig s;
  check_keys(j, "synth",
             {"n_units", "n_months", "first_month", "p_escalate", "p_escalation_to_war", "p_war_persist",
              "p_reescalate", "initial_conflict_share", "signal_effect", "signal_persistence",
              "escalation_log_mean", "escalation_log_sd", "war_log_mean", "war_log_sd", "covariate_noise",
              "missing_rate", "groups"});
  const std::string w = "synth";
  read(j, "n_units", s.n_units, w);
  read(j, "n_months", s.n_months, w);
  read(j, "first_month", s.first_month, w);
  read(j, "p_escalate", s.p_escalate, w);
  read(j, "p_escalation_to_war", s.p_escalation_to_war, w);
  read(j, "p_war_persist", s.p_war_persist, w);
  read(j, "p_reescalate", s.p_reescalate, w);
  read(j, "initial_conflict_share", s.initial_conflict_share, w);
  read(j, "signal_effect", s.signal_effect, w);
  read(j, "signal_persistence", s.signal_persistence, w);
  read(j, "escalation_log_mean", s.escalation_log_mean, w);
  read(j, "escalation_log_sd", s.escalation_log_sd, w);
  read(j, "war_log_mean", s.war_log_mean, w);
  read(j, "war_log_sd", s.war_log_sd, w);
  read(j, "covariate_noise", s.covariate_noise, w);
  read(j, "missing_rate", s.missing_rate, w);
  if (j.contains("groups")) {
    s.groups.clear();
    for (const auto& g : j.at("groups")) {
      check_keys(g, "synth.groups[]", {"name", "n_columns", "n_signal_columns"});
      SynthGroup sg;
      read(g, "name", sg.name, "synth.groups[]");
      read(g, "n_columns", sg.n_columns, "synth.groups[]");
      read(g, "n_signal_columns", sg.n_signal_columns, "synth.groups[]");
      s.groups.push_back(sg);
    }
  }
  return s;
}

json synth_json(const SynthConfig& s) {
  json j;
  j["n_units"] = s.n_units;
  j["n_months"] = s.n_months;
  j["first_month"] = s.first_month;
  j["p_escalate"] = s.p_escalate;
  j["p_escalation_to_war"] = s.p_escalation_to_war;
  j["p_war_persist"] = s.p_war_persist;
  j["p_reescalate"] = s.p_reescalate;
  j["initial_conflict_share"] = s.initial_conflict_share;
  j["signal_effect"] = s.signal_effect;
  j["signal_persistence"] = s.signal_persistence;
  j["escalation_log_mean"] = s.escalation_log_mean;
  j["escalation_log_sd"] = s.escalation_log_sd;
  j["war_log_mean"] = s.war_log_mean;
  j["war_log_sd"] = s.war_log_sd;
  j["covariate_noise"] = s.covariate_noise;
  j["missing_rate"] = s.missing_rate;
  j["groups"] = json::array();
  for (const auto& g : s.groups)
    j["groups"].push_back({{"name", g.name}, {"n_columns", g.n_columns}, {"n_signal_columns", g.n_signal_columns}});
  return j;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  check_keys(j, "", {"seed", "threads", "paths", "features", "classifier", "regressor", "simulation", "split",
                     "metrics", "benchmarks", "backtest", "synth"});
  read(j, "seed", cfg.seed, "");
  read(j, "threads", cfg.threads, "");

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, "paths", {"panel", "model", "out_dir"});
    std::string s;
    if (p.contains("panel")) cfg.paths.panel = p.at("panel").get<std::string>();
    if (p.contains("model")) cfg.paths.model = p.at("model").get<std::string>();
    if (p.contains("out_dir")) cfg.paths.out_dir = p.at("out_dir").get<std::string>();
  }
  if (j.contains("features")) {
    const auto& f = j.at("features");
    check_keys(f, "features", {"half_life", "groups"});
    read(f, "half_life", cfg.half_life, "features");
    if (f.contains("groups")) {
      cfg.groups.clear();
      for (const auto& g : f.at("groups")) {
        check_keys(g, "features.groups[]", {"name", "columns", "components"});
        FeatureGroupSpec spec;
        read(g, "name", spec.name, "features.groups[]");
        read(g, "columns", spec.columns, "features.groups[]");
        read(g, "components", spec.components, "features.groups[]");
        cfg.groups.push_back(std::move(spec));
      }
    }
  }
  if (j.contains("classifier")) cfg.classifier = parse_forest(j.at("classifier"), cfg.classifier, "classifier", nullptr);
  if (j.contains("regressor"))
    cfg.regressor = parse_forest(j.at("regressor"), cfg.regressor, "regressor", &cfg.log_target);
  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    check_keys(s, "simulation", {"n_draws", "summary_quantiles"});
    read(s, "n_draws", cfg.n_draws, "simulation");
    read(s, "summary_quantiles", cfg.summary_quantiles, "simulation");
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "split", {"train_end_month", "forecast_start_month", "horizon"});
    read(s, "horizon", cfg.horizon, "split");
    if (s.contains("train_end_month") || s.contains("forecast_start_month")) {
      SplitSpec sp;
      sp.horizon = cfg.horizon;
      read(s, "train_end_month", sp.train_end_month, "split");
      sp.forecast_start_month = sp.train_end_month + 1;
      read(s, "forecast_start_month", sp.forecast_start_month, "split");
      cfg.split = sp;
    }
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    check_keys(m, "metrics", {"ign_edges", "prob_floor", "alpha"});
    read(m, "ign_edges", cfg.metrics.binning.lower_edges, "metrics");
    read(m, "prob_floor", cfg.metrics.binning.floor, "metrics");
    read(m, "alpha", cfg.metrics.alpha, "metrics");
  }
  if (j.contains("benchmarks")) {
    const auto& b = j.at("benchmarks");
    check_keys(b, "benchmarks", {"n_draws"});
    read(b, "n_draws", cfg.benchmark_draws, "benchmarks");
  }
  if (j.contains("backtest")) {
    const auto& b = j.at("backtest");
    check_keys(b, "backtest", {"n_origins", "horizon", "step"});
    read(b, "n_origins", cfg.backtest.n_origins, "backtest");
    read(b, "horizon", cfg.backtest.horizon, "backtest");
    read(b, "step", cfg.backtest.step, "backtest");
  }
  if (j.contains("synth")) cfg.synth = parse_synth(j.at("synth"));
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["paths"] = {{"panel", cfg.paths.panel.string()},
                {"model", cfg.paths.model.string()},
                {"out_dir", cfg.paths.out_dir.string()}};
  json groups = json::array();
  for (const auto& g : cfg.groups) groups.push_back({{"name", g.name}, {"columns", g.columns}, {"components", g.components}});
  j["features"] = {{"half_life", cfg.half_life}, {"groups", groups}};
  j["classifier"] = forest_json(cfg.classifier);
  j["regressor"] = forest_json(cfg.regressor);
  j["regressor"]["log_target"] = cfg.log_target;
  j["simulation"] = {{"n_draws", cfg.n_draws}, {"summary_quantiles", cfg.summary_quantiles}};
  j["split"] = {{"horizon", cfg.horizon}};
  if (cfg.split) {
    j["split"]["train_end_month"] = cfg.split->train_end_month;
    j["split"]["forecast_start_month"] = cfg.split->forecast_start_month;
  }
  j["metrics"] = {{"ign_edges", cfg.metrics.binning.lower_edges},
                  {"prob_floor", cfg.metrics.binning.floor},
                  {"alpha", cfg.metrics.alpha}};
  j["benchmarks"] = {{"n_draws", cfg.benchmark_draws}};
  j["backtest"] = {{"n_origins", cfg.backtest.n_origins}, {"horizon", cfg.backtest.horizon}, {"step", cfg.backtest.step}};
  j["synth"] = synth_json(cfg.synth);
  return j;
}

ModelFitOptions RunConfig::fit_options() const {
  ModelFitOptions o;
  o.groups = groups;
  o.half_life = half_life;
  o.classifier = classifier;
  o.regressor = regressor;
  o.log_target = log_target;
  o.seed = seed;
  o.threads = threads;
  return o;
}

SplitSpec RunConfig::resolve_split(MonthId last_month) const {
  if (split) return *split;
  SplitSpec s;
  s.horizon = horizon;
  s.train_end_month = last_month - horizon;
  s.forecast_start_month = s.train_end_month + 1;
  return s;
}

std::uint64_t RunConfig::hash() const {
  auto j = to_json(*this);
  j.erase("paths");
  j.erase("threads");
  return fnv1a(j.dump());
}

void RunConfig::validate() const {
  if (threads < 0) throw ValidationError("threads must be >= 0");
  if (!(half_life > 0.0)) throw ValidationError("features.half_life must be > 0");
  for (const auto& g : groups)
    if (g.components < 1 || g.components > static_cast<int>(g.columns.size()))
      throw ValidationError("features.groups." + g.name + ": components must lie in [1, number of columns]");
  classifier.validate();
  regressor.validate();
  if (n_draws < 1) throw ValidationError("simulation.n_draws must be >= 1");
  if (benchmark_draws < 1) throw ValidationError("benchmarks.n_draws must be >= 1");
  if (horizon < 1) throw ValidationError("split.horizon must be >= 1");
  if (split && split->train_end_month >= split->forecast_start_month)
    throw ValidationError("split.train_end_month must precede split.forecast_start_month");
  for (double q : summary_quantiles)
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("simulation.summary_quantiles must lie in [0, 1]");
  metrics.validate();
  if (backtest.n_origins < 1 || backtest.horizon < 1 || backtest.step < 1)
    throw ValidationError("backtest: n_origins, horizon and step must be >= 1");
  synth.validate();
}

}  // namespace omm

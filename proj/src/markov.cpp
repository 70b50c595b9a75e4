#include "omm/markov.hpp"

#include <fstream>

#include "omm/errors.hpp"
#include "omm/io.hpp"

namespace omm {

std::string_view to_string(MarkovState s) {
  switch (s) {
    case MarkovState::Peaceful:
      return "Peaceful";
    case MarkovState::Escalation:
      return "Escalation";
    case MarkovState::War:
      return "War";
    case MarkovState::DeEscalation:
      return "DeEscalation";
  }
  return "?";
}

std::vector<MarkovState> encode_states(std::span<const Count> fatalities) {
  if (fatalities.size() < 2) throw DataError("encode_states: need at least 2 months");
  std::vector<MarkovState> out;
  out.reserve(fatalities.size() - 1);
  for (std::size_t t = 1; t < fatalities.size(); ++t) out.push_back(state_from_pair(fatalities[t - 1], fatalities[t]));
  return out;
}

Index TransitionData::n_transitions() const {
  Index n = 0;
  for (const auto& rows : origin_rows) n += static_cast<Index>(rows.size());
  return n;
}

TransitionData collect_transitions(const PanelDataset& panel, const FeatureMatrix& features) {
  if (features.unit_offset.size() != panel.units.size())
    throw DataError("feature matrix does not match panel units");
  TransitionData data;
  for (std::size_t u = 0; u < panel.units.size(); ++u) {
    const auto& unit = panel.units[u];
    const auto& m = unit.months;
    const auto& f = unit.fatalities;
    for (std::size_t t = 1; t + 1 < m.size(); ++t) {
      if (m[t] - m[t - 1] != 1 || m[t + 1] - m[t] != 1) continue;
      const auto origin = static_cast<std::size_t>(state_from_pair(f[t - 1], f[t]));
      const Index row = features.unit_offset[u] + static_cast<Index>(t);
      data.origin_rows[origin].push_back(row);
      data.labels[origin].push_back(f[t + 1] > 0 ? 1 : 0);
      const auto next = state_from_pair(f[t], f[t + 1]);
      if (!is_zero_state(next)) {
        data.outcome_rows[static_cast<std::size_t>(next)].push_back(row);
        data.outcome_targets[static_cast<std::size_t>(next)].push_back(static_cast<double>(f[t + 1]));
      }
    }
  }
  return data;
}

namespace {

Matrix gather_rows(const Matrix& values, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = values.row(rows[i]);
  return out;
}

std::uint64_t state_seed(std::uint64_t seed, std::string_view stage, MarkovState s) {
  return derive_seed(seed, {fnv1a(stage), static_cast<std::uint64_t>(s)});
}

}  // namespace

TransitionModelSet fit_transition_models(const PanelDataset& train, const FeatureMatrix& features,
                                         const ForestHyperparams& hyper) {
  const auto data = collect_transitions(train, features);
  Index total = 0, total_positive = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    total += static_cast<Index>(data.labels[s].size());
    for (int l : data.labels[s]) total_positive += l;
  }

  TransitionModelSet set;
  for (auto state : kAllStates) {
    const auto s = static_cast<std::size_t>(state);
    auto& model = set.models[s];
    model.origin = state;
    model.n_rows = static_cast<Index>(data.labels[s].size());
    for (int l : data.labels[s]) model.n_positive += l;

    if (model.n_rows == 0) {
      model.global_prior = true;
      model.fallback_rate = static_cast<double>(total_positive + 1) / static_cast<double>(total + 2);
    } else if (model.n_positive == 0 || model.n_positive == model.n_rows) {
      model.fallback_rate = static_cast<double>(model.n_positive + 1) / static_cast<double>(model.n_rows + 2);
    } else {
      auto h = hyper;
      h.seed = state_seed(hyper.seed, "transition", state);
      model.classifier = fit_classifier(gather_rows(features.values, data.origin_rows[s]), data.labels[s], h);
    }
  }
  return set;
}

const OutcomeModel& OutcomeModelSet::operator[](MarkovState s) const {
  switch (s) {
    case MarkovState::Escalation:
      return escalation;
    case MarkovState::War:
      return war;
    default:
      throw ModelError("no outcome model for zero-fatality state " + std::string(to_string(s)));
  }
}

OutcomeModelSet fit_outcome_models(const PanelDataset& train, const FeatureMatrix& features,
                                   const ForestHyperparams& hyper, bool log_target) {
  const auto data = collect_transitions(train, features);
  const auto esc = static_cast<std::size_t>(MarkovState::Escalation);
  const auto war = static_cast<std::size_t>(MarkovState::War);

  std::vector<Index> pooled_rows = data.outcome_rows[esc];
  pooled_rows.insert(pooled_rows.end(), data.outcome_rows[war].begin(), data.outcome_rows[war].end());
  std::vector<double> pooled_y = data.outcome_targets[esc];
  pooled_y.insert(pooled_y.end(), data.outcome_targets[war].begin(), data.outcome_targets[war].end());
  if (pooled_rows.empty())
    throw ModelError("unfittable outcome model: training window has no Escalation or War months");

  auto fit = [&](MarkovState state) {
    const auto s = static_cast<std::size_t>(state);
    OutcomeModel m;
    auto h = hyper;
    h.seed = state_seed(hyper.seed, "outcome", state);
    const bool enough = static_cast<Index>(data.outcome_rows[s].size()) >= hyper.min_leaf_size;
    const auto& rows = enough ? data.outcome_rows[s] : pooled_rows;
    const auto& y = enough ? data.outcome_targets[s] : pooled_y;
    m.pooled = !enough;
    m.n_rows = static_cast<Index>(rows.size());
    m.forest = fit_qrf(gather_rows(features.values, rows), y, h, log_target);
    return m;
  };
  OutcomeModelSet set;
  set.escalation = fit(MarkovState::Escalation);
  set.war = fit(MarkovState::War);
  return set;
}

std::array<double, 2> transition_prob(const TransitionModelSet& models, MarkovState s, const ConstRowRef& x) {
  const auto& m = models[s];
  if (m.classifier) return m.classifier->predict_proba(x);
  return {1.0 - m.fallback_rate, m.fallback_rate};
}

FittedModelSet fit_model_set(const PanelDataset& train, const ModelFitOptions& options) {
  if (train.units.empty()) throw DataError("fit_model_set: empty training panel");
  FittedModelSet models;
  models.pipeline = fit_feature_pipeline(train, options.groups, options.half_life);
  const auto features = build_feature_matrix(train, models.pipeline);
  auto clf = options.classifier;
  clf.seed = derive_seed(options.seed, {fnv1a("classifier")});
  clf.threads = options.threads;
  auto reg = options.regressor;
  reg.seed = derive_seed(options.seed, {fnv1a("regressor")});
  reg.threads = options.threads;
  models.transitions = fit_transition_models(train, features, clf);
  models.outcomes = fit_outcome_models(train, features, reg, options.log_target);
  models.metadata.train_first_month = train.first_month();
  models.metadata.train_end_month = train.last_month();
  models.metadata.seed = options.seed;
  models.metadata.code_version = OMM_VERSION;
  return models;
}

namespace {

constexpr char kMagic[8] = {'O', 'M', 'M', 'A', 'R', 'C', 'H', '\0'};
constexpr std::uint32_t kArchiveVersion = 1;

}  // namespace

void save_model_set(const std::filesystem::path& path, const FittedModelSet& models) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write model archive " + path.string());
  os.write(kMagic, sizeof(kMagic));
  io::BinaryWriter w(os);
  w.put(kArchiveVersion);
  w.put(models.metadata.train_first_month);
  w.put(models.metadata.train_end_month);
  w.put(models.metadata.seed);
  w.put(models.metadata.config_hash);
  w.put(models.metadata.code_version);
  save(w, models.pipeline);
  for (const auto& m : models.transitions.models) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.origin));
    w.put(m.fallback_rate);
    w.put<std::uint8_t>(m.global_prior ? 1 : 0);
    w.put<std::int64_t>(m.n_rows);
    w.put<std::int64_t>(m.n_positive);
    w.put<std::uint8_t>(m.classifier ? 1 : 0);
    if (m.classifier) save(w, *m.classifier);
  }
  for (const auto* m : {&models.outcomes.escalation, &models.outcomes.war}) {
    w.put<std::uint8_t>(m->pooled ? 1 : 0);
    w.put<std::int64_t>(m->n_rows);
    save(w, m->forest);
  }
  if (!os) throw DataError("failed writing model archive " + path.string());
}

FittedModelSet load_model_set(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model archive " + path.string());
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic)))
    throw DataError(path.string() + " is not a model archive");
  io::BinaryReader r(is);
  const auto version = r.get<std::uint32_t>();
  if (version != kArchiveVersion)
    throw DataError("unsupported model archive version " + std::to_string(version));
  FittedModelSet models;
  models.metadata.train_first_month = r.get<MonthId>();
  models.metadata.train_end_month = r.get<MonthId>();
  models.metadata.seed = r.get<std::uint64_t>();
  models.metadata.config_hash = r.get<std::uint64_t>();
  models.metadata.code_version = r.get_string();
  models.pipeline = load_feature_pipeline(r);
  for (auto& m : models.transitions.models) {
    m.origin = static_cast<MarkovState>(r.get<std::uint8_t>());
    m.fallback_rate = r.get<double>();
    m.global_prior = r.get<std::uint8_t>() != 0;
    m.n_rows = r.get<std::int64_t>();
    m.n_positive = r.get<std::int64_t>();
    if (r.get<std::uint8_t>() != 0) m.classifier = load_classifier(r);
  }
  for (auto* m : {&models.outcomes.escalation, &models.outcomes.war}) {
    m->pooled = r.get<std::uint8_t>() != 0;
    m->n_rows = r.get<std::int64_t>();
    m->forest = load_qrf(r);
  }
  return models;
}

}  // namespace omm

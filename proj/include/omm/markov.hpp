#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omm/features.hpp"
#include "omm/forest.hpp"
#include "omm/panel.hpp"

namespace omm {

enum class MarkovState : std::uint8_t { Peaceful = 0, Escalation = 1, War = 2, DeEscalation = 3 };

inline constexpr std::array<MarkovState, 4> kAllStates{MarkovState::Peaceful, MarkovState::Escalation,
                                                       MarkovState::War, MarkovState::DeEscalation};

std::string_view to_string(MarkovState s);

/// Peaceful and DeEscalation carry zero fatalities in the current month.
constexpr bool is_zero_state(MarkovState s) { return s == MarkovState::Peaceful || s == MarkovState::DeEscalation; }

constexpr MarkovState state_from_pair(Count previous, Count current) {
  if (previous == 0) return current == 0 ? MarkovState::Peaceful : MarkovState::Escalation;
  return current == 0 ? MarkovState::DeEscalation : MarkovState::War;
}

struct SuccessorPair {
  MarkovState zero;     // reached when next-month fatalities are 0
  MarkovState nonzero;  // reached when next-month fatalities are > 0
};

/// The single legality table for the state machine.
constexpr SuccessorPair allowed_successors(MarkovState s) {
  switch (s) {
    case MarkovState::Peaceful:
    case MarkovState::DeEscalation:
      return {MarkovState::Peaceful, MarkovState::Escalation};
    case MarkovState::Escalation:
    case MarkovState::War:
      return {MarkovState::DeEscalation, MarkovState::War};
  }
  return {MarkovState::Peaceful, MarkovState::Escalation};
}

constexpr bool is_legal_transition(MarkovState from, MarkovState to) {
  const auto next = allowed_successors(from);
  return to == next.zero || to == next.nonzero;
}

/// States for months 2..n of a fatality series (the first month has no state).
std::vector<MarkovState> encode_states(std::span<const Count> fatalities);

/// Transition and outcome training rows, aligned to origin-month features.
struct TransitionData {
  std::array<std::vector<Index>, 4> origin_rows;  // feature-matrix rows per origin state
  std::array<std::vector<int>, 4> labels;         // 1 = moved to the nonzero successor
  std::array<std::vector<Index>, 4> outcome_rows; // per successor state (only nonzero states used)
  std::array<std::vector<double>, 4> outcome_targets;

  Index n_transitions() const;
};

/// Pairs (t, t+1) of consecutive observed months where month t has a state.
TransitionData collect_transitions(const PanelDataset& panel, const FeatureMatrix& features);

struct TransitionModel {
  MarkovState origin = MarkovState::Peaceful;
  std::optional<ProbClassifier> classifier;
  double fallback_rate = 0.0;  // P(nonzero successor) when no classifier
  bool global_prior = false;   // origin never observed in training
  Index n_rows = 0;
  Index n_positive = 0;

  bool is_fallback() const { return !classifier.has_value(); }
};

struct TransitionModelSet {
  std::array<TransitionModel, 4> models;

  const TransitionModel& operator[](MarkovState s) const { return models[static_cast<std::size_t>(s)]; }
};

struct OutcomeModel {
  QuantileForest forest;
  bool pooled = false;  // fit on Escalation and War rows together
  Index n_rows = 0;
};

struct OutcomeModelSet {
  OutcomeModel escalation;
  OutcomeModel war;

  const OutcomeModel& operator[](MarkovState s) const;
};

TransitionModelSet fit_transition_models(const PanelDataset& train, const FeatureMatrix& features,
                                         const ForestHyperparams& hyper);

OutcomeModelSet fit_outcome_models(const PanelDataset& train, const FeatureMatrix& features,
                                   const ForestHyperparams& hyper, bool log_target = true);

/// Probabilities aligned to allowed_successors(s): (zero successor, nonzero successor).
std::array<double, 2> transition_prob(const TransitionModelSet& models, MarkovState s, const ConstRowRef& x);

struct TrainingMetadata {
  MonthId train_first_month = 0;
  MonthId train_end_month = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string code_version;
};

struct FittedModelSet {
  FeaturePipeline pipeline;
  TransitionModelSet transitions;
  OutcomeModelSet outcomes;
  TrainingMetadata metadata;
};

struct ModelFitOptions {
  std::vector<FeatureGroupSpec> groups = default_feature_groups();
  double half_life = 12.0;
  ForestHyperparams classifier = ForestHyperparams::classifier_defaults();
  ForestHyperparams regressor = ForestHyperparams::regressor_defaults();
  bool log_target = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Fits the full two-stage model on every row of `train`.
FittedModelSet fit_model_set(const PanelDataset& train, const ModelFitOptions& options);

void save_model_set(const std::filesystem::path& path, const FittedModelSet& models);
FittedModelSet load_model_set(const std::filesystem::path& path);

}  // namespace omm

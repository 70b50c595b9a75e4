#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omm/types.hpp"

namespace omm {

/// Covariate name -> thematic group tag.
using CovariateSchema = std::map<std::string, std::string>;

/// One unit's observations, sorted by month. Missing covariates are NaN.
struct UnitSeries {
  std::string id;
  std::vector<MonthId> months;
  std::vector<Count> fatalities;
  Matrix covariates;  // months.size() x n_covariates

  Index size() const { return static_cast<Index>(months.size()); }
  MonthId first_month() const { return months.front(); }
  MonthId last_month() const { return months.back(); }
  /// Position of `month` in this series, if observed.
  std::optional<Index> position(MonthId month) const;
};

/// Long-format unit-month panel. Every unit shares the covariate schema and the
/// global month index.
struct PanelDataset {
  std::vector<std::string> covariate_names;
  CovariateSchema schema;
  std::vector<UnitSeries> units;

  Index n_rows() const;
  Index n_covariates() const { return static_cast<Index>(covariate_names.size()); }
  MonthId first_month() const;
  MonthId last_month() const;
  const UnitSeries* find(const std::string& unit_id) const;
  std::optional<Index> covariate_index(const std::string& name) const;
};

PanelDataset read_panel_csv(std::istream& in, const CovariateSchema& schema = {});
PanelDataset load_panel(const std::filesystem::path& path, const CovariateSchema& schema = {});
void write_panel_csv(std::ostream& out, const PanelDataset& panel);
void write_panel(const std::filesystem::path& path, const PanelDataset& panel);

struct MonthGap {
  std::string unit_id;
  MonthId missing_month;
};

struct ValidationReport {
  std::vector<MonthGap> gaps;
  /// Missing fraction for every covariate column, in schema order.
  std::vector<double> missing_fraction;
  std::vector<std::string> constant_columns;
  /// Units with fewer than 24 observed months; informational only.
  std::vector<std::string> short_units;

  /// Human-readable issues; gaps, partially-missing columns and constant columns.
  std::vector<std::string> issues(const std::vector<std::string>& covariate_names) const;
};

ValidationReport validate_panel(const PanelDataset& panel);

struct SplitSpec {
  MonthId train_end_month = 0;
  MonthId forecast_start_month = 1;
  int horizon = 12;

  MonthId forecast_end_month() const { return forecast_start_month + horizon - 1; }
};

/// Rows with month in [first, last]; units with no rows left are dropped.
PanelDataset restrict_months(const PanelDataset& panel, MonthId first, MonthId last);

std::pair<PanelDataset, PanelDataset> split_train_eval(const PanelDataset& panel, const SplitSpec& spec);

struct SynthGroup {
  std::string name;
  int n_columns = 3;
  /// Leading columns that carry the transition-driving signal.
  int n_signal_columns = 0;
};

/// Generator for OMM-style panels: a four-state chain whose zero-to-nonzero
/// transitions are shifted on the logit scale by a persistent per-unit signal.
struct SynthConfig {
  int n_units = 50;
  int n_months = 180;
  MonthId first_month = 1;

  double p_escalate = 0.05;            // Peaceful -> Escalation
  double p_escalation_to_war = 0.5;    // Escalation -> War
  double p_war_persist = 0.85;         // War -> War
  double p_reescalate = 0.2;           // DeEscalation -> Escalation
  double initial_conflict_share = 0.0; // units whose first month is nonzero

  double signal_effect = 0.0;       // logit shift per SD of signal (zero-state origins)
  double signal_persistence = 0.95; // AR(1) coefficient of the signal

  double escalation_log_mean = 1.5;
  double escalation_log_sd = 1.0;
  double war_log_mean = 3.0;
  double war_log_sd = 1.2;

  double covariate_noise = 0.5;
  double missing_rate = 0.0;
  std::vector<SynthGroup> groups = default_synth_groups();

  static std::vector<SynthGroup> default_synth_groups();
  /// Throws ValidationError naming the offending field.
  void validate() const;
};

PanelDataset synth_panel(const SynthConfig& config, std::uint64_t seed);

}  // namespace omm

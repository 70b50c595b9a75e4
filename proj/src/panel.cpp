#include "omm/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "omm/errors.hpp"
#include "omm/rng.hpp"

namespace omm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA" || s == "nan" || s == "NaN"; }

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::optional<Index> UnitSeries::position(MonthId month) const {
  auto it = std::lower_bound(months.begin(), months.end(), month);
  if (it == months.end() || *it != month) return std::nullopt;
  return static_cast<Index>(it - months.begin());
}

Index PanelDataset::n_rows() const {
  Index n = 0;
  for (const auto& u : units) n += u.size();
  return n;
}

MonthId PanelDataset::first_month() const {
  if (units.empty()) throw DataError("empty panel has no month range");
  MonthId m = std::numeric_limits<MonthId>::max();
  for (const auto& u : units) m = std::min(m, u.first_month());
  return m;
}

MonthId PanelDataset::last_month() const {
  if (units.empty()) throw DataError("empty panel has no month range");
  MonthId m = std::numeric_limits<MonthId>::min();
  for (const auto& u : units) m = std::max(m, u.last_month());
  return m;
}

const UnitSeries* PanelDataset::find(const std::string& unit_id) const {
  for (const auto& u : units)
    if (u.id == unit_id) return &u;
  return nullptr;
}

std::optional<Index> PanelDataset::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
  if (it == covariate_names.end()) return std::nullopt;
  return static_cast<Index>(it - covariate_names.begin());
}

PanelDataset read_panel_csv(std::istream& in, const CovariateSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("panel CSV is empty");
  strip_cr(line);
  const auto header = split_csv_line(line);
  const std::vector<std::string> mandatory{"unit_id", "month_id", "fatalities"};
  for (std::size_t i = 0; i < mandatory.size(); ++i) {
    if (header.size() <= i || header[i] != mandatory[i])
      throw DataError("panel CSV missing mandatory column '" + mandatory[i] + "' at position " + std::to_string(i));
  }

  PanelDataset panel;
  panel.covariate_names.assign(header.begin() + 3, header.end());
  for (const auto& [name, group] : schema) {
    if (!panel.covariate_index(name)) throw DataError("panel CSV missing covariate column '" + name + "'");
  }
  panel.schema = schema;
  const auto n_cov = static_cast<Index>(panel.covariate_names.size());

  struct Row {
    MonthId month;
    Count fatalities;
    std::vector<double> cov;
  };
  std::map<std::string, std::vector<Row>> by_unit;
  std::vector<std::string> unit_order;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    Row row;
    if (!parse_number(fields[1], row.month))
      throw DataError("line " + std::to_string(line_no) + ": month_id '" + fields[1] + "' is not an integer");
    if (!parse_number(fields[2], row.fatalities))
      throw DataError("line " + std::to_string(line_no) + ": fatalities '" + fields[2] + "' is not an integer");
    if (row.fatalities < 0)
      throw DataError("line " + std::to_string(line_no) + ": fatalities must be non-negative, got " + fields[2]);
    row.cov.resize(static_cast<std::size_t>(n_cov));
    for (Index c = 0; c < n_cov; ++c) {
      const auto& f = fields[static_cast<std::size_t>(3 + c)];
      double v = kNaN;
      if (!is_missing_token(f) && !parse_number(f, v))
        throw DataError("line " + std::to_string(line_no) + ": covariate '" +
                        panel.covariate_names[static_cast<std::size_t>(c)] + "' value '" + f + "' is not numeric");
      row.cov[static_cast<std::size_t>(c)] = v;
    }
    auto [it, inserted] = by_unit.try_emplace(fields[0]);
    if (inserted) unit_order.push_back(fields[0]);
    it->second.push_back(std::move(row));
  }

  for (const auto& id : unit_order) {
    auto& rows = by_unit[id];
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.month < b.month; });
    UnitSeries u;
    u.id = id;
    u.covariates.resize(static_cast<Index>(rows.size()), n_cov);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].month == rows[i - 1].month)
        throw DataError("duplicate (unit, month) pair: (" + id + ", " + std::to_string(rows[i].month) + ")");
      u.months.push_back(rows[i].month);
      u.fatalities.push_back(rows[i].fatalities);
      for (Index c = 0; c < n_cov; ++c) u.covariates(static_cast<Index>(i), c) = rows[i].cov[static_cast<std::size_t>(c)];
    }
    panel.units.push_back(std::move(u));
  }
  return panel;
}

PanelDataset load_panel(const std::filesystem::path& path, const CovariateSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file " + path.string());
  return read_panel_csv(in, schema);
}

void write_panel_csv(std::ostream& out, const PanelDataset& panel) {
  out << "unit_id,month_id,fatalities";
  for (const auto& name : panel.covariate_names) out << ',' << name;
  out << '\n';
  for (const auto& u : panel.units) {
    for (Index i = 0; i < u.size(); ++i) {
      out << u.id << ',' << u.months[static_cast<std::size_t>(i)] << ',' << u.fatalities[static_cast<std::size_t>(i)];
      for (Index c = 0; c < u.covariates.cols(); ++c) out << ',' << format_double(u.covariates(i, c));
      out << '\n';
    }
  }
}

void write_panel(const std::filesystem::path& path, const PanelDataset& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write panel file " + path.string());
  write_panel_csv(out, panel);
}

std::vector<std::string> ValidationReport::issues(const std::vector<std::string>& covariate_names) const {
  std::vector<std::string> out;
  for (const auto& g : gaps) out.push_back("unit " + g.unit_id + ": missing month " + std::to_string(g.missing_month));
  for (std::size_t c = 0; c < missing_fraction.size(); ++c) {
    if (missing_fraction[c] > 0.0)
      out.push_back("column " + covariate_names[c] + ": " + std::to_string(missing_fraction[c]) + " missing");
  }
  for (const auto& c : constant_columns) out.push_back("column " + c + ": constant");
  return out;
}

ValidationReport validate_panel(const PanelDataset& panel) {
  ValidationReport report;
  const Index n_cov = panel.n_covariates();
  std::vector<Index> missing(static_cast<std::size_t>(n_cov), 0);
  std::vector<double> first_value(static_cast<std::size_t>(n_cov), kNaN);
  std::vector<bool> varies(static_cast<std::size_t>(n_cov), false);
  Index rows = 0;

  for (const auto& u : panel.units) {
    for (std::size_t i = 1; i < u.months.size(); ++i)
      for (MonthId m = u.months[i - 1] + 1; m < u.months[i]; ++m) report.gaps.push_back({u.id, m});
    if (u.size() < 24) report.short_units.push_back(u.id);
    rows += u.size();
    for (Index c = 0; c < n_cov; ++c) {
      const auto k = static_cast<std::size_t>(c);
      for (Index i = 0; i < u.size(); ++i) {
        const double v = u.covariates(i, c);
        if (std::isnan(v)) {
          ++missing[k];
        } else if (std::isnan(first_value[k])) {
          first_value[k] = v;
        } else if (v != first_value[k]) {
          varies[k] = true;
        }
      }
    }
  }
  for (Index c = 0; c < n_cov; ++c) {
    const auto k = static_cast<std::size_t>(c);
    report.missing_fraction.push_back(rows > 0 ? static_cast<double>(missing[k]) / static_cast<double>(rows) : 0.0);
    if (!varies[k]) report.constant_columns.push_back(panel.covariate_names[k]);
  }
  return report;
}

PanelDataset restrict_months(const PanelDataset& panel, MonthId first, MonthId last) {
  PanelDataset out;
  out.covariate_names = panel.covariate_names;
  out.schema = panel.schema;
  for (const auto& u : panel.units) {
    auto lo = std::lower_bound(u.months.begin(), u.months.end(), first) - u.months.begin();
    auto hi = std::upper_bound(u.months.begin(), u.months.end(), last) - u.months.begin();
    if (hi <= lo) continue;
    UnitSeries s;
    s.id = u.id;
    s.months.assign(u.months.begin() + lo, u.months.begin() + hi);
    s.fatalities.assign(u.fatalities.begin() + lo, u.fatalities.begin() + hi);
    s.covariates = u.covariates.middleRows(lo, hi - lo);
    out.units.push_back(std::move(s));
  }
  return out;
}

std::pair<PanelDataset, PanelDataset> split_train_eval(const PanelDataset& panel, const SplitSpec& spec) {
  if (spec.horizon < 1) throw ValidationError("split.horizon must be >= 1");
  if (spec.train_end_month >= spec.forecast_start_month)
    throw ValidationError("split: train_end_month (" + std::to_string(spec.train_end_month) +
                          ") overlaps forecast window starting at " + std::to_string(spec.forecast_start_month));
  if (panel.units.empty()) throw DataError("split: panel is empty");
  if (spec.forecast_end_month() > panel.last_month())
    throw DataError("split: forecast window ends at month " + std::to_string(spec.forecast_end_month()) +
                    " but panel ends at month " + std::to_string(panel.last_month()));
  auto train = restrict_months(panel, std::numeric_limits<MonthId>::min(), spec.train_end_month);
  auto eval = restrict_months(panel, spec.forecast_start_month, spec.forecast_end_month());
  if (train.units.empty()) throw DataError("split: empty training window");
  if (eval.units.empty()) throw DataError("split: empty evaluation window");
  return {std::move(train), std::move(eval)};
}

std::vector<SynthGroup> SynthConfig::default_synth_groups() {
  return {
      {"vdem", 4, 0},         {"violence_history", 3, 0}, {"wdi", 4, 0},          {"military_expenditure", 2, 0},
      {"demographics", 2, 0}, {"environment", 2, 0},      {"neighborhood", 3, 2},
  };
}

void SynthConfig::validate() const {
  auto check_prob = [](double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError(std::string("synth.") + field + " must lie in [0, 1], got " + std::to_string(p));
  };
  check_prob(p_escalate, "p_escalate");
  check_prob(p_escalation_to_war, "p_escalation_to_war");
  check_prob(p_war_persist, "p_war_persist");
  check_prob(p_reescalate, "p_reescalate");
  check_prob(initial_conflict_share, "initial_conflict_share");
  check_prob(missing_rate, "missing_rate");
  if (n_units < 1) throw ValidationError("synth.n_units must be >= 1");
  if (n_months < 2) throw ValidationError("synth.n_months must be >= 2");
  if (!(signal_persistence >= 0.0 && signal_persistence < 1.0))
    throw ValidationError("synth.signal_persistence must lie in [0, 1)");
  if (escalation_log_sd < 0.0 || war_log_sd < 0.0 || covariate_noise < 0.0)
    throw ValidationError("synth: standard deviations must be non-negative");
  for (const auto& g : groups) {
    if (g.n_columns < 1 || g.n_signal_columns < 0 || g.n_signal_columns > g.n_columns)
      throw ValidationError("synth.groups." + g.name + ": invalid column counts");
  }
}

namespace {

double shifted_probability(double base, double shift) {
  if (base <= 0.0 || base >= 1.0 || shift == 0.0) return base;
  const double logit = std::log(base / (1.0 - base)) + shift;
  return 1.0 / (1.0 + std::exp(-logit));
}

}  // namespace

PanelDataset synth_panel(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  PanelDataset panel;
  for (const auto& g : config.groups) {
    for (int k = 1; k <= g.n_columns; ++k) {
      const auto name = g.name + "_" + std::to_string(k);
      panel.covariate_names.push_back(name);
      panel.schema[name] = g.name;
    }
  }
  const auto n_cov = static_cast<Index>(panel.covariate_names.size());
  const double rho = config.signal_persistence;
  const double innovation = std::sqrt(1.0 - rho * rho);

  for (int u = 0; u < config.n_units; ++u) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(u)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    UnitSeries s;
    s.id = "U" + std::to_string(u + 1);
    const auto T = static_cast<Index>(config.n_months);
    s.covariates.resize(T, n_cov);

    // Per-unit offsets and per-group AR(1) factors make groups internally correlated.
    std::vector<double> col_offset(static_cast<std::size_t>(n_cov));
    for (auto& o : col_offset) o = normal(rng);
    std::vector<double> group_factor(config.groups.size());
    for (auto& f : group_factor) f = normal(rng);
    double signal = normal(rng);

    auto draw_fatalities = [&](bool escalation) {
      const double mu = escalation ? config.escalation_log_mean : config.war_log_mean;
      const double sd = escalation ? config.escalation_log_sd : config.war_log_sd;
      return std::max<Count>(1, std::llround(std::exp(mu + sd * normal(rng))));
    };

    Count prev = 0;
    Count cur = uniform01(rng) < config.initial_conflict_share ? draw_fatalities(false) : 0;
    for (Index t = 0; t < T; ++t) {
      s.months.push_back(config.first_month + static_cast<MonthId>(t));
      s.fatalities.push_back(cur);

      Index col = 0;
      for (std::size_t g = 0; g < config.groups.size(); ++g) {
        group_factor[g] = rho * group_factor[g] + innovation * normal(rng);
        const auto& grp = config.groups[g];
        for (int k = 0; k < grp.n_columns; ++k, ++col) {
          const double latent = k < grp.n_signal_columns ? signal : group_factor[g];
          double v = col_offset[static_cast<std::size_t>(col)] * (k < grp.n_signal_columns ? 0.0 : 1.0) + latent +
                     config.covariate_noise * normal(rng);
          if (config.missing_rate > 0.0 && uniform01(rng) < config.missing_rate) v = kNaN;
          s.covariates(t, col) = v;
        }
      }

      // Transition out of the state at month t, driven by the month-t signal.
      const bool prev_zero = prev == 0;
      const bool cur_zero = cur == 0;
      double p_nonzero;
      if (cur_zero) {
        const double base = prev_zero ? config.p_escalate : config.p_reescalate;
        p_nonzero = shifted_probability(base, config.signal_effect * signal);
      } else {
        p_nonzero = prev_zero ? config.p_escalation_to_war : config.p_war_persist;
      }
      const bool next_nonzero = uniform01(rng) < p_nonzero;
      Count next = 0;
      if (next_nonzero) next = draw_fatalities(cur_zero);
      prev = cur;
      cur = next;
      signal = rho * signal + innovation * normal(rng);
    }
    panel.units.push_back(std::move(s));
  }
  return panel;
}

}  // namespace omm

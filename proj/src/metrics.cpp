#include "omm/metrics.hpp"

#include <charconv>
#include <iomanip>
#include <ostream>

namespace omm {

void IgnBinning::validate() const {
  if (lower_edges.empty() || lower_edges.front() != 0.0)
    throw ValidationError("metrics.ign_edges must start at 0");
  for (std::size_t i = 1; i < lower_edges.size(); ++i)
    if (!(lower_edges[i] > lower_edges[i - 1])) throw ValidationError("metrics.ign_edges must be strictly increasing");
  if (!(floor > 0.0 && floor <= 1.0)) throw ValidationError("metrics.prob_floor must lie in (0, 1]");
}

void MetricConfig::validate() const {
  binning.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("metrics.alpha must lie in (0, 1)");
}

std::vector<CellScore> score_cells(const ForecastDraws& fd, const PanelDataset& actuals, const MetricConfig& cfg) {
  cfg.validate();
  check_draws(fd);
  std::vector<CellScore> scores;
  scores.reserve(fd.cells.size());
  const UnitSeries* unit = nullptr;
  for (Index c = 0; c < fd.n_cells(); ++c) {
    const auto& key = fd.cells[static_cast<std::size_t>(c)];
    if (unit == nullptr || unit->id != key.unit_id) unit = actuals.find(key.unit_id);
    const auto pos = unit ? unit->position(key.month) : std::nullopt;
    if (!pos)
      throw DataError("missing actual for forecast cell (" + key.unit_id + ", " + std::to_string(key.month) + ")");
    const Count y = unit->fatalities[static_cast<std::size_t>(*pos)];
    const auto draws = fd.values.row(c);
    const auto yd = static_cast<double>(y);
    const auto [l, u] = central_interval(draws, cfg.alpha);
    scores.push_back({key, y, crps_sample(draws, yd), ign_binned(draws, yd, cfg.binning),
                      interval_score(l, u, yd, cfg.alpha), yd >= l && yd <= u});
  }
  return scores;
}

namespace {

struct Accumulator {
  double crps = 0.0, ign = 0.0, mis = 0.0, covered = 0.0;
  Index n = 0;

  void add(double c, double i, double m, double cov, Index k) {
    crps += c;
    ign += i;
    mis += m;
    covered += cov;
    n += k;
  }
  ScoreSummary summary() const {
    if (n == 0) return {};
    const auto d = static_cast<double>(n);
    return {crps / d, ign / d, mis / d, covered / d, n};
  }
};

}  // namespace

MetricReport evaluate(const ForecastDraws& fd, const PanelDataset& actuals, const MetricConfig& cfg,
                      const std::string& model) {
  MetricReport report;
  report.model = model;
  report.cells = score_cells(fd, actuals, cfg);
  Accumulator all;
  std::map<std::string, Accumulator> units;
  std::map<MonthId, Accumulator> months;
  for (const auto& s : report.cells) {
    const double cov = s.covered ? 1.0 : 0.0;
    all.add(s.crps, s.ign, s.mis, cov, 1);
    units[s.cell.unit_id].add(s.crps, s.ign, s.mis, cov, 1);
    months[s.cell.month].add(s.crps, s.ign, s.mis, cov, 1);
  }
  report.overall = all.summary();
  for (const auto& [k, a] : units) report.per_unit[k] = a.summary();
  for (const auto& [k, a] : months) report.per_month[k] = a.summary();
  return report;
}

MetricReport pool_reports(const std::string& model, std::span<const MetricReport> reports) {
  MetricReport pooled;
  pooled.model = model;
  Accumulator all;
  for (const auto& r : reports) {
    const auto n = static_cast<double>(r.overall.n_cells);
    all.add(r.overall.crps * n, r.overall.ign * n, r.overall.mis * n, r.overall.coverage * n, r.overall.n_cells);
    pooled.cells.insert(pooled.cells.end(), r.cells.begin(), r.cells.end());
  }
  pooled.overall = all.summary();
  return pooled;
}

std::vector<MetricReport> rank_reports(std::vector<MetricReport> reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const MetricReport& a, const MetricReport& b) { return a.overall.crps < b.overall.crps; });
  return reports;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << "model,crps,ign,mis\n";
  for (const auto& r : reports)
    out << r.model << ',' << shortest(r.overall.crps) << ',' << shortest(r.overall.ign) << ','
        << shortest(r.overall.mis) << '\n';
}

void write_report_table(std::ostream& out, std::span<const MetricReport> reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.model.size());
  const auto flags = out.flags();
  out << std::left << std::setw(static_cast<int>(width)) << "model" << std::right << std::setw(12) << "crps"
      << std::setw(10) << "ign" << std::setw(12) << "mis" << '\n';
  out << std::string(width + 34, '-') << '\n';
  out << std::fixed;
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(width)) << r.model << std::right << std::setprecision(2)
        << std::setw(12) << r.overall.crps << std::setw(10) << r.overall.ign << std::setw(12) << r.overall.mis
        << '\n';
  }
  out.flags(flags);
}

}  // namespace omm

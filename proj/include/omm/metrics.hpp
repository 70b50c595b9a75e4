#pragma once

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "omm/draws.hpp"
#include "omm/errors.hpp"
#include "omm/panel.hpp"

namespace omm {

namespace detail {

template <typename Derived>
std::vector<double> sorted_copy(const Eigen::DenseBase<Derived>& draws) {
  if (draws.size() == 0) throw ValidationError("scoring needs at least one draw");
  std::vector<double> x(static_cast<std::size_t>(draws.size()));
  Index k = 0;
  for (Index i = 0; i < draws.rows(); ++i)
    for (Index j = 0; j < draws.cols(); ++j) x[static_cast<std::size_t>(k++)] = static_cast<double>(draws(i, j));
  std::sort(x.begin(), x.end());
  return x;
}

}  // namespace detail

/// Empirical quantile of ascending `sorted` with linear interpolation between order statistics.
inline double empirical_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("empirical_quantile: no values");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("empirical_quantile: level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Sample CRPS, mean|x_i - y| - (1 / 2m^2) sum_ij |x_i - x_j|, in O(m log m) via order statistics.
template <typename Derived>
double crps_sample(const Eigen::DenseBase<Derived>& draws, double y) {
  const auto x = detail::sorted_copy(draws);
  const auto m = static_cast<double>(x.size());
  double abs_err = 0.0;
  double pairwise = 0.0;  // sum_{i<j} (x_j - x_i)
  for (std::size_t i = 0; i < x.size(); ++i) {
    abs_err += std::abs(x[i] - y);
    pairwise += (2.0 * static_cast<double>(i) - m + 1.0) * x[i];
  }
  return abs_err / m - pairwise / (m * m);
}

/// Bins over non-negative counts given by ascending lower edges; the first edge is 0
/// and the last bin is open-ended.
struct IgnBinning {
  std::vector<double> lower_edges{0, 1, 3, 6, 11, 26, 51, 101, 251, 501, 1001};
  double floor = 0.001;

  void validate() const;
  Index bin_of(double value) const {
    return static_cast<Index>(std::upper_bound(lower_edges.begin(), lower_edges.end(), value) - lower_edges.begin()) - 1;
  }
};

/// Binned ignorance: -log2 of the (floored) share of draws in the observation's bin.
template <typename Derived>
double ign_binned(const Eigen::DenseBase<Derived>& draws, double y, const IgnBinning& binning) {
  if (draws.size() == 0) throw ValidationError("scoring needs at least one draw");
  const Index target = binning.bin_of(y);
  Index hits = 0;
  for (Index i = 0; i < draws.rows(); ++i)
    for (Index j = 0; j < draws.cols(); ++j) hits += binning.bin_of(static_cast<double>(draws(i, j))) == target;
  const double p = std::max(static_cast<double>(hits) / static_cast<double>(draws.size()), binning.floor);
  return -std::log2(p);
}

/// Interval score of the central (1 - alpha) interval [lower, upper].
inline double interval_score(double lower, double upper, double y, double alpha) {
  double s = upper - lower;
  if (y < lower) s += 2.0 / alpha * (lower - y);
  if (y > upper) s += 2.0 / alpha * (y - upper);
  return s;
}

template <typename Derived>
std::pair<double, double> central_interval(const Eigen::DenseBase<Derived>& draws, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const auto x = detail::sorted_copy(draws);
  return {empirical_quantile(x, alpha / 2.0), empirical_quantile(x, 1.0 - alpha / 2.0)};
}

template <typename Derived>
double mis(const Eigen::DenseBase<Derived>& draws, double y, double alpha) {
  const auto [l, u] = central_interval(draws, alpha);
  return interval_score(l, u, y, alpha);
}

struct MetricConfig {
  IgnBinning binning;
  double alpha = 0.1;

  void validate() const;
};

struct CellScore {
  CellKey cell;
  Count actual = 0;
  double crps = 0.0;
  double ign = 0.0;
  double mis = 0.0;
  bool covered = false;  // actual inside the central (1 - alpha) interval
};

struct ScoreSummary {
  double crps = 0.0;
  double ign = 0.0;
  double mis = 0.0;
  double coverage = 0.0;
  Index n_cells = 0;
};

struct MetricReport {
  std::string model;
  ScoreSummary overall;
  std::map<std::string, ScoreSummary> per_unit;
  std::map<MonthId, ScoreSummary> per_month;
  std::vector<CellScore> cells;
};

/// Scores every forecast cell; throws DataError if an actual is missing.
std::vector<CellScore> score_cells(const ForecastDraws& fd, const PanelDataset& actuals, const MetricConfig& cfg);

MetricReport evaluate(const ForecastDraws& fd, const PanelDataset& actuals, const MetricConfig& cfg,
                      const std::string& model = "model");

/// Cell-weighted pooling of several reports (e.g. rolling origins) into one.
MetricReport pool_reports(const std::string& model, std::span<const MetricReport> reports);

/// Ascending mean CRPS; ties keep input order.
std::vector<MetricReport> rank_reports(std::vector<MetricReport> reports);

/// CSV with header model,crps,ign,mis.
void write_report_csv(std::ostream& out, std::span<const MetricReport> reports);
/// Fixed-width table with columns model / crps / ign / mis.
void write_report_table(std::ostream& out, std::span<const MetricReport> reports);

}  // namespace omm

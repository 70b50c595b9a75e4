#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "omm/types.hpp"

namespace omm {

struct ForecastWindow {
  MonthId start = 1;
  int horizon = 12;

  MonthId end() const { return start + horizon - 1; }
  bool contains(MonthId m) const { return m >= start && m <= end(); }
};

struct CellKey {
  std::string unit_id;
  MonthId month = 0;

  auto operator<=>(const CellKey&) const = default;
};

/// Predictive density per unit-month as a fixed number of integer draws.
/// Cells are ordered unit-major (panel unit order), months ascending.
struct ForecastDraws {
  std::vector<CellKey> cells;
  CountMatrix values;  // cells x draws

  Index n_cells() const { return values.rows(); }
  Index n_draws() const { return values.cols(); }
};

ForecastDraws make_forecast_draws(const std::vector<std::string>& unit_ids, const ForecastWindow& window,
                                  Index n_draws);

/// Throws DataError unless every draw is non-negative and every cell has n_draws values.
void check_draws(const ForecastDraws& fd);

/// Long CSV: unit_id,month_id,draw_idx,outcome.
void write_draws_csv(std::ostream& out, const ForecastDraws& fd);
void write_draws(const std::filesystem::path& path, const ForecastDraws& fd);
ForecastDraws read_draws_csv(std::istream& in);
ForecastDraws read_draws(const std::filesystem::path& path);

}  // namespace omm

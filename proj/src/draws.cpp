#include "omm/draws.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "omm/errors.hpp"

namespace omm {

ForecastDraws make_forecast_draws(const std::vector<std::string>& unit_ids, const ForecastWindow& window,
                                  Index n_draws) {
  if (n_draws < 1) throw ValidationError("n_draws must be >= 1");
  if (window.horizon < 1) throw ValidationError("horizon must be >= 1");
  ForecastDraws fd;
  for (const auto& id : unit_ids)
    for (MonthId m = window.start; m <= window.end(); ++m) fd.cells.push_back({id, m});
  fd.values = CountMatrix::Zero(static_cast<Index>(fd.cells.size()), n_draws);
  return fd;
}

void check_draws(const ForecastDraws& fd) {
  if (static_cast<Index>(fd.cells.size()) != fd.values.rows())
    throw DataError("forecast draws: cell list and value matrix disagree");
  if (fd.n_cells() > 0 && fd.n_draws() < 1) throw DataError("forecast draws: no draws per cell");
  if (fd.n_cells() > 0 && fd.values.minCoeff() < 0) throw DataError("forecast draws: negative draw");
}

void write_draws_csv(std::ostream& out, const ForecastDraws& fd) {
  out << "unit_id,month_id,draw_idx,outcome\n";
  std::string line;
  char buf[32];
  for (Index c = 0; c < fd.n_cells(); ++c) {
    const auto& key = fd.cells[static_cast<std::size_t>(c)];
    const std::string prefix = key.unit_id + ',' + std::to_string(key.month) + ',';
    for (Index j = 0; j < fd.n_draws(); ++j) {
      line = prefix;
      line += std::to_string(j);
      line += ',';
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), fd.values(c, j));
      line.append(buf, p);
      line += '\n';
      out << line;
    }
  }
}

void write_draws(const std::filesystem::path& path, const ForecastDraws& fd) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write draws file " + path.string());
  write_draws_csv(out, fd);
}

namespace {

template <typename T>
T parse_field(const std::string& s, std::size_t line_no, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("draws line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

ForecastDraws read_draws_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("draws file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "unit_id,month_id,draw_idx,outcome") throw DataError("draws file has unexpected header: " + line);

  std::vector<CellKey> cells;
  std::map<CellKey, std::size_t> index;
  std::vector<std::vector<std::pair<Index, Count>>> values;
  std::size_t line_no = 1;
  std::string fields[4];
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    int k = 0;
    while (k < 4 && std::getline(ss, fields[k], ',')) ++k;
    if (k != 4 || !ss.eof()) throw DataError("draws line " + std::to_string(line_no) + ": expected 4 fields");
    CellKey key{fields[0], parse_field<MonthId>(fields[1], line_no, "month_id")};
    const auto draw = parse_field<Index>(fields[2], line_no, "draw_idx");
    const auto outcome = parse_field<Count>(fields[3], line_no, "outcome");
    if (outcome < 0) throw DataError("draws line " + std::to_string(line_no) + ": negative outcome");
    auto [it, inserted] = index.try_emplace(key, cells.size());
    if (inserted) {
      cells.push_back(key);
      values.emplace_back();
    }
    values[it->second].emplace_back(draw, outcome);
  }

  ForecastDraws fd;
  fd.cells = std::move(cells);
  const Index m = values.empty() ? 0 : static_cast<Index>(values.front().size());
  fd.values.resize(static_cast<Index>(fd.cells.size()), m);
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (static_cast<Index>(values[c].size()) != m)
      throw DataError("draws file: cell (" + fd.cells[c].unit_id + ", " + std::to_string(fd.cells[c].month) +
                      ") has " + std::to_string(values[c].size()) + " draws, expected " + std::to_string(m));
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (auto [j, v] : values[c]) {
      if (j < 0 || j >= m || seen[static_cast<std::size_t>(j)])
        throw DataError("draws file: bad draw_idx " + std::to_string(j) + " for unit " + fd.cells[c].unit_id);
      seen[static_cast<std::size_t>(j)] = true;
      fd.values(static_cast<Index>(c), j) = v;
    }
  }
  return fd;
}

ForecastDraws read_draws(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open draws file " + path.string());
  return read_draws_csv(in);
}

}  // namespace omm

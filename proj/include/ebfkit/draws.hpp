#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "ebfkit/csv.hpp"
#include "ebfkit/errors.hpp"
#include "ebfkit/linalg.hpp"

namespace ebfkit {

/// S x P posterior draws with named columns, rows in iteration order.
struct DrawsMatrix {
  std::vector<std::string> columns;
  Matrix values;
  /// One id per row when the file carried a "chain" column, else empty.
  std::vector<int> chain_id;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == name) return c;
    }
    return std::nullopt;
  }

  std::size_t index_of(const std::string& name) const {
    if (auto c = find(name)) return *c;
    throw MissingColumn("draws have no column '" + name + "'");
  }

  Vector column(const std::string& name) const { return values.col(static_cast<Eigen::Index>(index_of(name))); }
};

inline constexpr const char* kChainColumn = "chain";

/// Reads draws from CSV text: header of unique names, one row per retained
/// iteration, optional integer "chain" column.
inline DrawsMatrix read_draws(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!csv::trim(line).empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError(1, 1, "missing header row");
  const auto header = csv::split(line);
  std::optional<std::size_t> chain_col;
  DrawsMatrix d;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(csv::trim(header[c]));
    if (name.empty()) throw ParseError(line_no, c + 1, "empty column name");
    if (!seen.insert(name).second) throw DuplicateColumn("column '" + name + "' appears more than once");
    if (name == kChainColumn) {
      chain_col = c;
    } else {
      d.columns.push_back(name);
    }
  }

  std::vector<std::vector<double>> rows;
  while (next_line()) {
    const auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, std::min(fields.size(), header.size()) + 1,
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(d.columns.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (chain_col && c == *chain_col) {
        d.chain_id.push_back(static_cast<int>(csv::parse_integer(fields[c], line_no, c + 1)));
      } else {
        row.push_back(csv::parse_double(fields[c], line_no, c + 1));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) {
    throw ParseError(line_no + 1, 1, "draws need at least 2 rows, found " + std::to_string(rows.size()));
  }
  d.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
      d.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return d;
}

inline DrawsMatrix read_draws(const std::string& path) {
  auto in = csv::open_input(path);
  return read_draws(in);
}

inline void write_draws(std::ostream& out, const DrawsMatrix& d) {
  const bool chains = !d.chain_id.empty();
  if (chains) out << kChainColumn << (d.columns.empty() ? "" : ",");
  for (std::size_t c = 0; c < d.columns.size(); ++c) out << (c ? "," : "") << d.columns[c];
  out << '\n';
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
    if (chains) out << d.chain_id[static_cast<std::size_t>(r)] << (d.values.cols() ? "," : "");
    for (Eigen::Index c = 0; c < d.values.cols(); ++c) {
      out << (c ? "," : "") << csv::format_double(d.values(r, c));
    }
    out << '\n';
  }
}

inline void write_draws(const std::string& path, const DrawsMatrix& d) {
  auto out = csv::open_output(path);
  write_draws(out, d);
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ebfkit

#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "otmatch/error.hpp"
#include "otmatch/measures.hpp"
#include "otmatch/solver.hpp"

namespace otmatch::io {

inline double parse_number(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw io_error("cannot parse number '" + std::string(text) + "' at " + where);
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw usage_error("no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    cell.erase(std::remove(cell.begin(), cell.end(), '\r'), cell.end());
    const auto a = cell.find_first_not_of(" \t\"");
    const auto b = cell.find_last_not_of(" \t\"");
    out.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

/// Numeric CSV with a header row. Empty cells are rejected (no missing values).
inline Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw io_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                     " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty() || cells[c] == "NA") {
        throw io_error(path + ":" + std::to_string(lineno) + ": missing value in column '" + t.header[c] + "'");
      }
      row.push_back(parse_number(cells[c], path + ":" + std::to_string(lineno)));
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw io_error("'" + path + "' has no header row");
  if (t.rows.empty()) throw io_error("'" + path + "' has no data rows");
  return t;
}

inline Matrix table_matrix(const Table& t, const std::vector<std::size_t>& cols) {
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.rows[r][cols[c]];
  }
  return m;
}

/// Point cloud file: CSV with a header; every column is a coordinate.
inline Matrix read_points(const std::string& path) {
  const auto t = read_csv(path);
  std::vector<std::size_t> cols(t.header.size());
  for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
  return table_matrix(t, cols);
}

/// Dataset from a CSV: treatment and outcome columns by name; covariates are the
/// listed columns, or every remaining column when the list is empty.
inline Dataset read_dataset(const std::string& path, const std::string& treatment_col, const std::string& outcome_col,
                            std::vector<std::string> covariate_cols = {}) {
  const auto t = read_csv(path);
  const auto tc = t.column(treatment_col);
  const auto oc = t.column(outcome_col);
  if (covariate_cols.empty()) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != tc && c != oc) covariate_cols.push_back(t.header[c]);
    }
  }
  std::vector<std::size_t> cols;
  for (const auto& name : covariate_cols) cols.push_back(t.column(name));
  Dataset d;
  d.columns = covariate_cols;
  d.covariates = table_matrix(t, cols);
  for (const auto& row : t.rows) {
    const double tr = row[tc];
    if (tr != std::floor(tr) || tr < 0) throw usage_error("treatment values must be non-negative integers");
    d.treatment.push_back(static_cast<int>(tr));
    d.outcome.push_back(row[oc]);
  }
  d.validate();
  return d;
}

inline const std::vector<std::string>& nsw_columns() {
  static const std::vector<std::string> cols = {"treat",   "age",      "education", "black", "hispanic",
                                                "married", "nodegree", "re75",      "re78"};
  return cols;
}

/// NSW text layout: whitespace-separated "treat age education black hispanic
/// married nodegree re75 re78", optional header line. re78 is the outcome.
inline Dataset read_nsw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  Dataset d;
  d.columns.assign(nsw_columns().begin() + 1, nsw_columns().end() - 1);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string s; ss >> s;) tok.push_back(s);
    if (tok.empty()) continue;
    if (rows.empty() && !tok.empty() && tok[0] == "treat") continue;
    if (tok.size() != 9) {
      throw io_error(path + ":" + std::to_string(lineno) + ": NSW rows have 9 columns, found " + std::to_string(tok.size()));
    }
    std::vector<double> r;
    for (const auto& s : tok) r.push_back(parse_number(s, path + ":" + std::to_string(lineno)));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw io_error("'" + path + "' has no data rows");
  d.covariates.resize(static_cast<Eigen::Index>(rows.size()), 7);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][0] != 0.0 && rows[i][0] != 1.0) throw usage_error("NSW treat column must be 0 or 1");
    d.treatment.push_back(static_cast<int>(rows[i][0]));
    for (int c = 0; c < 7; ++c) d.covariates(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c) + 1];
    d.outcome.push_back(rows[i][8]);
  }
  d.validate();
  return d;
}

// Shortest round-trip decimal text, locale independent.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("NA");
}

inline std::string fmt_fixed(double v, int digits) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("NA");
}

/// Coupling as "i_1,...,i_J,mass" rows; entries below rel_cutoff * max are skipped.
inline std::size_t write_coupling(std::ostream& out, const Coupling& c, double rel_cutoff = 1e-12) {
  const auto& v = c.values.values();
  const double top = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  for (std::size_t a = 0; a < c.values.order(); ++a) out << "i" << a << ",";
  out << "mass\n";
  std::vector<std::size_t> idx;
  std::size_t written = 0;
  for (std::size_t flat = 0; flat < v.size(); ++flat) {
    if (v[flat] < rel_cutoff * top || v[flat] == 0.0) continue;
    c.values.unravel(flat, idx);
    for (std::size_t a : idx) out << a << ",";
    out << fmt(v[flat]) << "\n";
    ++written;
  }
  return written;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  return out;
}

}  // namespace otmatch::io

#pragma once

// Plain-text matrix formats.
//   text: first line "M N", then M lines of N whitespace-separated values
//   csv:  M lines of N comma-separated values, no header
// Values are written with 17 significant digits so doubles read back exactly.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "uampmf/core.hpp"

namespace uampmf {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_matrix_text(std::ostream& os, const Matrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n' << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
}

inline Matrix read_matrix_text(std::istream& is) {
  long long rows = -1, cols = -1;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) {
    throw FormatError("matrix text: expected header line \"M N\"");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      if (!(is >> m(i, j))) {
        throw FormatError("matrix text: missing value at row " + std::to_string(i + 1) +
                          ", column " + std::to_string(j + 1));
      }
    }
  std::string extra;
  if (is >> extra) throw FormatError("matrix text: trailing data after " + shape_str(rows, cols));
  return m;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  os << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw FormatError("matrix csv: bad value '" + cell + "' on row " +
                          std::to_string(rows.size() + 1));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("matrix csv: ragged row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  const Index r = static_cast<Index>(rows.size());
  const Index c = r ? static_cast<Index>(rows.front().size()) : 0;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Reads a matrix, picking the format from the extension (.csv or text).
inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open matrix file: " + path);
  return has_suffix(path, ".csv") ? read_matrix_csv(in) : read_matrix_text(in);
}

inline void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write matrix file: " + path);
  if (has_suffix(path, ".csv")) {
    write_matrix_csv(out, m);
  } else {
    write_matrix_text(out, m);
  }
}

}  // namespace uampmf

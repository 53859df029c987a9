#include "structinfer/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace structinfer {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    out.push_back(cell.substr(start));
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (X.rows() < 2) throw std::invalid_argument("dataset needs at least 2 rows");
  if (X.rows() != Y.size()) throw std::invalid_argument("X and Y row counts differ");
  if (!X.allFinite() || !Y.allFinite()) throw std::invalid_argument("dataset has non-finite entries");
}

Dataset Dataset::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty data file: " + path);

  std::vector<std::string> header = split_csv_line(line);
  int y_col = -1;
  std::vector<int> x_col;  // x_col[k] = column index of "x{k+1}"
  x_col.assign(header.size(), -1);
  int p = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "y") {
      y_col = static_cast<int>(c);
    } else if (header[c].size() > 1 && header[c][0] == 'x') {
      int k = 0;
      try {
        k = std::stoi(header[c].substr(1));
      } catch (...) {
        throw std::invalid_argument("unrecognized column name: " + header[c]);
      }
      if (k < 1 || k > static_cast<int>(header.size()))
        throw std::invalid_argument("design column index out of range: " + header[c]);
      x_col[static_cast<std::size_t>(k - 1)] = static_cast<int>(c);
      p = std::max(p, k);
    } else {
      throw std::invalid_argument("unrecognized column name: " + header[c]);
    }
  }
  if (y_col < 0) throw std::invalid_argument("data file has no y column");
  for (int k = 0; k < p; ++k)
    if (x_col[static_cast<std::size_t>(k)] < 0)
      throw std::invalid_argument("missing design column x" + std::to_string(k + 1));

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("row with wrong number of cells in " + path);
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        row[c] = std::stod(cells[c]);
      } catch (...) {
        throw std::invalid_argument("non-numeric cell in " + path + ": " + cells[c]);
      }
    }
    rows.push_back(std::move(row));
  }

  Dataset data;
  data.X.resize(static_cast<int>(rows.size()), p);
  data.Y.resize(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    data.Y[static_cast<int>(r)] = rows[r][static_cast<std::size_t>(y_col)];
    for (int k = 0; k < p; ++k)
      data.X(static_cast<int>(r), k) = rows[r][static_cast<std::size_t>(x_col[static_cast<std::size_t>(k)])];
  }
  data.validate();
  return data;
}

void Dataset::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write data file: " + path);
  out << "y";
  for (int k = 1; k <= p(); ++k) out << ",x" << k;
  out << "\n";
  char buf[40];
  for (int i = 0; i < n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.15g", Y[i]);
    out << buf;
    for (int k = 0; k < p(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.15g", X(i, k));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace structinfer

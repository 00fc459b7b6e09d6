#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2p {

/// Prints a float with enough digits to round-trip exactly through text.
inline std::string fmt_g9(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.9g", v);
  return b;
}
inline std::string fmt_g17(double v) {
  char b[48];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

struct CsvWriter {
  std::ofstream f;
  size_t ncols = 0;

  CsvWriter() = default;
  CsvWriter(const std::string& path, const std::vector<std::string>& header) {
    open(path, header);
  }
  void open(const std::string& path, const std::vector<std::string>& header) {
    f.open(path);
    if (!f) throw std::runtime_error("cannot open csv for write: " + path);
    ncols = header.size();
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols) throw std::logic_error("csv row width mismatch");
    for (size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
    f << "\n";
    f.flush();
  }
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return (int)i;
    throw std::out_of_range("csv column missing: " + name);
  }
  double num(size_t r, const std::string& name) const {
    return std::stod(rows[r][(size_t)col(name)]);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open csv: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace s2p

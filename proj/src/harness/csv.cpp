#include "locrobust/harness/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "locrobust/error.hpp"

namespace locrobust::harness {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(const std::string& cell) {
  require(!rows_.empty(), "CsvTable: add() before row()");
  require(rows_.back().size() < header_.size(), "CsvTable: too many cells in row");
  rows_.back().push_back(cell);
  return *this;
}

CsvTable& CsvTable::add(double value) { return add(format_double(value)); }
CsvTable& CsvTable::add(long value) { return add(std::to_string(value)); }

namespace {

void write_cell(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_line(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    write_cell(out, cells[i]);
  }
  out << '\n';
}

}  // namespace

void CsvTable::write(std::ostream& out) const {
  write_line(out, header_);
  for (const auto& r : rows_) {
    require(r.size() == header_.size(), "CsvTable: incomplete row");
    write_line(out, r);
  }
}

void CsvTable::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw NumericalError("write to '" + path + "' failed");
}

NumericTable read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  NumericTable t;
  std::string line;
  long lineno = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      while (!c.empty() && c.front() == ' ') c.erase(c.begin());
      cells.push_back(c);
    }
    return cells;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    const auto cells = split(line);
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    if (cells.size() != t.header.size())
      throw ValidationError(where + "expected " + std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cells[j], &pos));
        if (pos != cells[j].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ValidationError(where + "field '" + t.header[j] + "' is not a number: '" + cells[j] + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ValidationError(path + ": empty file");
  return t;
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

}  // namespace locrobust::harness

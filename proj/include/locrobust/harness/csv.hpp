#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace locrobust::harness {

/// %.17g rendering (round-trips doubles); NaN prints as "nan".
std::string format_double(double x);

/// Minimal CSV table: a header plus string cells, quoted when needed.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row();
  CsvTable& add(const std::string& cell);
  CsvTable& add(double value);
  CsvTable& add(long value);
  CsvTable& add(int value) { return add(static_cast<long>(value)); }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Header plus rows of numbers; malformed cells are reported with their
/// line and column.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

NumericTable read_numeric_csv(const std::string& path);

/// Pairwise (cascade) summation of a contiguous range.
double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace locrobust::harness

#pragma once

// Minimal CSV emission with a '#' header naming columns and units. Numbers are
// written with 17 significant digits so outputs are byte-reproducible.

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace nlbound {

struct CsvColumn {
  std::string name;
  std::string unit;
};

class CsvWriter {
 public:
  /// `preamble` lines are written verbatim after a leading "# ".
  CsvWriter(const std::filesystem::path& path, std::vector<CsvColumn> columns,
            const std::vector<std::string>& preamble = {});

  void row(std::span<const double> values);
  void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
  /// Writes a row whose leading cells are text labels.
  void row(const std::vector<std::string>& labels, std::span<const double> values);

 private:
  std::ofstream out_;
  std::size_t width_;
};

std::string format_number(double v);

}  // namespace nlbound

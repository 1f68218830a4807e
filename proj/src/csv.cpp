#include "nlbound/csv.hpp"

#include <cmath>

#include <fmt/format.h>

#include "nlbound/error.hpp"

namespace nlbound {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<CsvColumn> columns,
                     const std::vector<std::string>& preamble)
    : out_(path), width_(columns.size()) {
  if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
  std::string header = "# ";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) header += ',';
    header += columns[i].name;
    if (!columns[i].unit.empty()) header += "[" + columns[i].unit + "]";
  }
  out_ << header << '\n';
  for (const auto& line : preamble) out_ << "# " << line << '\n';
}

void CsvWriter::row(std::span<const double> values) {
  if (values.size() != width_) throw Error("CSV row width does not match the header");
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_number(values[i]);
  }
  out_ << line << '\n';
}

void CsvWriter::row(const std::vector<std::string>& labels, std::span<const double> values) {
  if (labels.size() + values.size() != width_) throw Error("CSV row width does not match the header");
  std::string line;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) line += ',';
    line += labels[i];
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i || !labels.empty()) line += ',';
    line += format_number(values[i]);
  }
  out_ << line << '\n';
}

}  // namespace nlbound

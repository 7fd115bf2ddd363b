#include "transopt/csv.hpp"

#include <sstream>

#include <fmt/format.h>

#include "transopt/error.hpp"

namespace transopt::csv {

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

Writer::Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw Error(fmt::format("cannot open {} for writing", path.string()));
}

Writer& Writer::field(std::string_view s) {
  if (row_started_) out_ << ',';
  out_ << s;
  row_started_ = true;
  return *this;
}

Writer& Writer::field(double x) { return field(std::string_view(format_double(x))); }
Writer& Writer::field(long long x) { return field(std::string_view(std::to_string(x))); }
Writer& Writer::field(unsigned long long x) { return field(std::string_view(std::to_string(x))); }

void Writer::end_row() {
  out_ << '\n';
  row_started_ = false;
}

void Writer::header(std::initializer_list<std::string_view> names) {
  for (auto n : names) field(n);
  end_row();
}

std::vector<std::vector<std::string>> read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace transopt::csv

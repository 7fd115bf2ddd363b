#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace transopt::csv {

/// 17 significant digits, so every double reparses bit-exactly.
std::string format_double(double x);

/// Minimal comma-delimited writer. Fields are written verbatim; callers
/// only emit identifiers and numbers, none of which need quoting.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  Writer& field(std::string_view s);
  Writer& field(double x);
  Writer& field(long long x);
  Writer& field(unsigned long long x);
  Writer& field(int x) { return field(static_cast<long long>(x)); }
  Writer& field(long x) { return field(static_cast<long long>(x)); }
  Writer& field(unsigned long x) { return field(static_cast<unsigned long long>(x)); }
  void end_row();

  void header(std::initializer_list<std::string_view> names);

 private:
  std::ofstream out_;
  bool row_started_ = false;
};

/// Splits a file into rows of cells; blank lines are skipped.
std::vector<std::vector<std::string>> read(const std::filesystem::path& path);

}  // namespace transopt::csv

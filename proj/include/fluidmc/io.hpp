#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fluidmc {

/// `%.10g`, with "inf", "-inf" and "nan" spelled out.
std::string format_number(double v);

/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_field(std::string_view s);

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  ///< throws UnknownIdentifier
  std::vector<double> numeric(std::size_t col) const;
};

/// Comma-separated rows; `#` lines and blank lines are skipped; the first
/// remaining line is the header. Throws InputError when empty or ragged.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace fluidmc

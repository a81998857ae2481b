#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slant {

// Minimal RFC 4180 reader/writer: quoted fields, embedded commas and quotes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, or nullopt.
  std::optional<std::size_t> find(std::string_view column) const;
  /// Column position by name; throws slant::Error naming the file context when absent.
  std::size_t require(std::string_view column) const;
};

std::vector<std::string> split_csv_line(std::string_view line);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

/// Shortest round-trip decimal form, so reruns produce byte-identical files.
std::string format_double(double value);

/// Parses a full string as double; empty or "NA" yields nullopt, anything else unparsable throws.
std::optional<double> parse_optional_double(std::string_view text);
double parse_double(std::string_view text, std::string_view context);

}  // namespace slant

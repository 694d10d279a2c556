#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace udot {

using Json = nlohmann::json;

/// Shortest round-trip friendly text: %.17g.
std::string format_real(double v);

/// Comma-separated table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws Config if absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Parses a numeric CSV written by write_csv. Throws Config on I/O or parse failure.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& doc);
/// Throws Config when the file is missing or not valid JSON.
Json read_json(const std::filesystem::path& path);

}  // namespace udot

#include "udot/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "udot/error.hpp"

namespace udot {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  throw Error(ErrorCode::Config, "CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::column_values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(c));
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Config, "cannot write " + path.string());
  for (std::size_t c = 0; c < table.header.size(); ++c) os << (c ? "," : "") << table.header[c];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_real(row[c]);
    os << '\n';
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Config, "cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::Config, path.string() + " is empty");
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Config, path.string() + ":" + std::to_string(lineno) +
                                           ": not a number: '" + cell + "'");
      }
    }
    if (row.size() != table.header.size())
      throw Error(ErrorCode::Config, path.string() + ":" + std::to_string(lineno) +
                                         ": wrong column count");
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Config, "cannot write " + path.string());
  os << doc.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Config, "cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

}  // namespace udot

#include "spatpomp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spatpomp/errors.hpp"

namespace spatpomp::csv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  std::string out = s.substr(begin, end - begin + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

Table parse(const std::string& text) {
  Table table;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw StructuralError("CSV line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw StructuralError("CSV input is empty");
  return table;
}

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

double parse_number(const std::string& field) {
  if (field.empty() || field == "NA" || field == "NaN" || field == "nan") return kMissing;
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("cannot parse '" + field + "' as a number");
  }
  return value;
}

std::string format(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::vector<ObsRecord> observations(const Table& table, const std::string& time_col,
                                    const std::string& unit_col, const std::string& value_col) {
  const auto ti = table.column(time_col);
  const auto ui = table.column(unit_col);
  const auto vi = table.column(value_col);
  std::vector<ObsRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const double t = parse_number(row[ti]);
    if (std::isnan(t)) throw StructuralError("observation record with missing time");
    out.push_back({t, row[ui], parse_number(row[vi])});
  }
  return out;
}

std::vector<CovariateRecord> covariates(const Table& table, const std::string& time_col,
                                        const std::string& unit_col) {
  const auto ti = table.column(time_col);
  const auto ui = table.column(unit_col);
  std::vector<CovariateRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    CovariateRecord rec{parse_number(row[ti]), row[ui], {}};
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == ti || c == ui) continue;
      rec.values[table.header[c]] = parse_number(row[c]);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << '\n';
}

}  // namespace spatpomp::csv

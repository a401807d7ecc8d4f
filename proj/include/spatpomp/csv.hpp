#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "spatpomp/model.hpp"

namespace spatpomp::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
};

/// Reads a comma-separated file with a header row. Surrounding double quotes
/// on a field are stripped.
Table read(const std::string& path);
Table parse(const std::string& text);

/// Parses a numeric field. "NA", "NaN" and empty fields are missing.
double parse_number(const std::string& field);

/// Shortest representation that round-trips; "NA" for NaN.
std::string format(double value);

/// Long-format observations: one record per row.
std::vector<ObsRecord> observations(const Table& table, const std::string& time_col,
                                    const std::string& unit_col, const std::string& value_col);

/// Long-format covariates: every column other than time and unit is a covariate.
std::vector<CovariateRecord> covariates(const Table& table, const std::string& time_col,
                                        const std::string& unit_col);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace spatpomp::csv

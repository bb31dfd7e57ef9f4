#pragma once

#include "lipcalc/common.hpp"

#include <string>
#include <vector>

namespace lipcalc::io {

using CsvTable = std::vector<std::vector<std::string>>;

/// Reads a comma-separated file; blank lines are skipped, cells are trimmed.
CsvTable read_csv(const std::string& path);

/// Writes rows joined by commas with a trailing newline per row.
void write_csv(const std::string& path, const CsvTable& rows);

double parse_double(const std::string& cell);
bool is_number(const std::string& cell);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace lipcalc::io

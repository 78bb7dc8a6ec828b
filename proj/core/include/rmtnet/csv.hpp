#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rmt::csv {

struct File {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // cells, one vector per row
};

/// Reads a comma-separated file with a mandatory header row. Cells are kept
/// as raw strings; no quoting support (none of our formats needs it).
File read_file(const std::string& path);

/// Parses a decimal real. Returns nullopt for the missing-value spellings
/// ("", "NA", "NaN", "nan", "null"). Throws ParseError on anything else
/// that is not a number.
std::optional<double> parse_real(const std::string& cell, std::size_t line_no);

/// Parses an integer cell, throwing ParseError with the line number.
long parse_int(const std::string& cell, std::size_t line_no);

/// Shortest representation of x that round-trips through strtod.
std::string format_double(double x);

}  // namespace rmt::csv

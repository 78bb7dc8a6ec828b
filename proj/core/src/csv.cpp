#include "rmtnet/csv.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rmtnet/error.hpp"

namespace rmt::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

File read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  File f;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      f.header = split(line);
      for (auto& h : f.header) h = trim(h);
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != f.header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(f.header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);
    f.rows.push_back(std::move(cells));
  }
  return f;
}

std::optional<double> parse_real(const std::string& cell, std::size_t line_no) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" ||
      cell == "null") {
    return std::nullopt;
  }
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ParseError("line " + std::to_string(line_no) +
                     ": not a number: '" + cell + "'");
  }
  return v;
}

long parse_int(const std::string& cell, std::size_t line_no) {
  long v = 0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || p != cell.data() + cell.size()) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": not an integer: '" + cell + "'");
  }
  return v;
}

std::string format_double(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, p);
}

}  // namespace rmt::csv

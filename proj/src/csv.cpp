#include "mgids/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "mgids/errors.hpp"

namespace mgids::data {

std::string format_value(double v, int digits) {
  char buf[64];
  int n = std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::string(buf, static_cast<std::size_t>(n));
}

void write_csv(const SampleTable& table, std::ostream& out, int digits) {
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << ',';
    out << cols[c];
  }
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    line.clear();
    auto row = table.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += ',';
      line += format_value(row[c], digits);
    }
    line += '\n';
    out << line;
  }
}

void write_csv(const SampleTable& table, const std::filesystem::path& path, int digits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_csv(table, out, digits);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

SampleTable read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (auto f : split_commas(line)) header.emplace_back(f);
  SampleTable table(header);
  std::vector<double> row(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      auto f = fields[c];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[c]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError("CSV line " + std::to_string(line_no) + ": bad number '" +
                        std::string(f) + "' in column " + header[c]);
      }
    }
    table.append_row(row);
  }
  return table;
}

SampleTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

}  // namespace mgids::data

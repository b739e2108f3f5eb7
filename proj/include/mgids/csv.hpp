#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mgids/table.hpp"

namespace mgids::data {

/// Significant digits used for dataset CSV values.
inline constexpr int kCsvDigits = 9;

/// Formats a value the way dataset CSVs store it ("%.9g" unless overridden).
std::string format_value(double v, int digits = kCsvDigits);

void write_csv(const SampleTable& table, std::ostream& out, int digits = kCsvDigits);
void write_csv(const SampleTable& table, const std::filesystem::path& path,
               int digits = kCsvDigits);

/// Reads a header line plus numeric rows. Throws DataError naming the
/// offending line on malformed input.
SampleTable read_csv(std::istream& in);
SampleTable read_csv(const std::filesystem::path& path);

}  // namespace mgids::data

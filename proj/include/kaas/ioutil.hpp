#pragma once

#include <string>

namespace kaas {

/// Shortest round-trip decimal form; locale-free and deterministic.
std::string fmt_double(double v);
/// Fixed-point with the given number of decimals.
std::string fmt_fixed(double v, int decimals);

/// UTC date (YYYY-MM-DD). Honors SOURCE_DATE_EPOCH so builds and reports
/// can be made reproducible.
std::string build_date_utc();

std::string read_text_file(const std::string& path);   // throws InvalidInputError
void write_text_file(const std::string& path, const std::string& content);

} // namespace kaas

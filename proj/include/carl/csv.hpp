#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "carl/moments.hpp"

namespace carl::csv {

/// Column order of one observables row.
const std::vector<std::string>& evolve_columns();
std::string evolve_header();

/// 17 significant digits, round-trip exact for doubles.
std::string format_number(double x);
/// Empty field for UNDEFINED.
std::string format_field(const Maybe& x);

/// Fields of `rec` in evolve_columns() order, without the trailing newline.
std::string evolve_row(const ObservablesRecord& rec);
std::vector<Maybe> evolve_values(const ObservablesRecord& rec);

/// Splits one CSV line on commas (no quoting is ever emitted).
std::vector<std::string> split_line(std::string_view line);

}  // namespace carl::csv

#include "carl/csv.hpp"

#include <cmath>
#include <cstdio>

namespace carl::csv {

const std::vector<std::string>& evolve_columns() {
  static const std::vector<std::string> columns = {
      "tau",       "I_a",       "I_minus",    "I_plus",       "g2_a",         "g2_minus",   "g2_plus",
      "g2_aminus", "g2_aplus",  "g2_minusplus", "cs_aminus",  "qb_aminus",    "cs_minusplus", "qb_minusplus",
      "cs_aplus",  "qb_aplus",  "dl_a",       "dphi_a",       "dl_minus",     "dphi_minus", "dl_plus",
      "dphi_plus", "B_re",      "B_im",       "BdagB",        "depletion"};
  return columns;
}

std::string evolve_header() {
  std::string out;
  for (const auto& c : evolve_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

std::string format_number(double x) {
  if (x == 0.0) x = 0.0;  // no "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_field(const Maybe& x) {
  if (!x || !std::isfinite(*x)) return {};
  return format_number(*x);
}

std::vector<Maybe> evolve_values(const ObservablesRecord& rec) {
  const auto& aminus = rec.pair(Pair::AMinus);
  const auto& minusplus = rec.pair(Pair::MinusPlus);
  const auto& aplus = rec.pair(Pair::APlus);
  const auto& u = rec.uncertainty;
  return {rec.tau,
          rec.intensity.probe,
          rec.intensity.minus,
          rec.intensity.plus,
          rec.g2[0],
          rec.g2[1],
          rec.g2[2],
          aminus.g2,
          aplus.g2,
          minusplus.g2,
          aminus.cs_bound,
          aminus.quantum_bound,
          minusplus.cs_bound,
          minusplus.quantum_bound,
          aplus.cs_bound,
          aplus.quantum_bound,
          u[0].relative_amplitude,
          u[0].phase,
          u[1].relative_amplitude,
          u[1].phase,
          u[2].relative_amplitude,
          u[2].phase,
          rec.bunch.mean.real(),
          rec.bunch.mean.imag(),
          rec.bunch.intensity,
          rec.depletion_fraction};
}

std::string evolve_row(const ObservablesRecord& rec) {
  std::string out;
  bool first = true;
  for (const auto& v : evolve_values(rec)) {
    if (!first) out += ',';
    out += format_field(v);
    first = false;
  }
  return out;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace carl::csv

#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "carl/model.hpp"

namespace carl::cli {

enum ExitCode : int { kSuccess = 0, kPhysicsError = 1, kUsageError = 2, kOracleError = 3 };

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Everything a run needs. Field names double as the keys of the flat JSON
/// config file; command-line flags use the same names with '-' for '_'.
struct RunConfig {
  std::string command;

  std::optional<double> chi;
  std::optional<double> delta;
  std::optional<double> alpha_re;
  std::optional<double> alpha_im;
  std::optional<PhysicalParams> physical;
  std::optional<double> atom_count;  // defaults to the physical N, else 1

  double tau_max = 10.0;
  int tau_points = 201;
  std::string propagator = "auto";  // auto | exact | series | asymptotic

  std::string sweep_param;  // chi | delta | alpha_re | alpha_im | tau
  double sweep_lo = 0.0;
  double sweep_hi = 1.0;
  int sweep_steps = 10;
  std::optional<double> tau;  // sweep default 1

  double chi_lo = 0.0;
  double chi_hi = 1.0;
  int chi_points = 11;
  double delta_lo = -4.0;
  double delta_hi = 4.0;
  int delta_points = 81;

  int cutoff_a = 16;
  int cutoff_minus = 16;
  int cutoff_plus = 12;
  double time_step = 0.05;
  double convergence_tol = 1e-9;

  double fraction_eps = 0.1;
  std::optional<double> probe_cap;  // defaults to the physical cap, else +inf

  std::string output;  // empty or "-" means stdout
  std::string svg;
  std::vector<std::string> svg_columns = {"I_a", "I_minus", "I_plus"};
  bool svg_log = true;

  /// Throws UsageError for out-of-range or inconsistent fields.
  void validate() const;
  cplx alpha() const { return {alpha_re.value_or(0.0), alpha_im.value_or(0.0)}; }
};

/// Overlays the keys of a flat JSON object onto `config`. Unknown keys and
/// mistyped values are usage errors.
void apply_json(RunConfig& config, const nlohmann::json& patch);

/// chi and delta from explicit values, falling back to the physical block.
/// Throws UsageError when neither supplies them.
ModelParams resolve_model(const RunConfig& config);
double effective_atom_count(const RunConfig& config);
double effective_probe_cap(const RunConfig& config);

/// Entry point behind the executable. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace carl::cli

#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "carl/csv.hpp"
#include "carl/oracle.hpp"
#include "carl/parallel.hpp"
#include "carl/validity.hpp"
#include "svg.hpp"

namespace carl::cli {

using nlohmann::json;

namespace {

enum Command : unsigned { kEigen = 1, kEvolve = 2, kSweep = 4, kMap = 8, kValidate = 16, kAll = 31 };

enum class Kind { Real, Integer, String, Boolean, List };

struct Field {
  const char* key;
  Kind kind;
  unsigned commands;
  const char* help;
  std::function<void(RunConfig&, const json&)> set;
};

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

double as_real(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    // JSON has no infinity literal
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
  }
  throw UsageError("'" + key + "' must be a number");
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw UsageError("'" + key + "' must be an integer");
  const auto n = v.get<long long>();
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    throw UsageError("'" + key + "' is out of range");
  }
  return static_cast<int>(n);
}

template <typename M>
std::function<void(RunConfig&, const json&)> setter(M RunConfig::*member, const char* key) {
  return [member, key](RunConfig& c, const json& v) {
    using T = std::remove_cvref_t<decltype(c.*member)>;
    if constexpr (std::is_same_v<T, double> || std::is_same_v<T, std::optional<double>>) {
      c.*member = as_real(v, key);
    } else if constexpr (std::is_same_v<T, int>) {
      c.*member = as_int(v, key);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw UsageError(std::string("'") + key + "' must be true or false");
      c.*member = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw UsageError(std::string("'") + key + "' must be a string");
      c.*member = v.get<std::string>();
    } else {
      if (!v.is_array()) throw UsageError(std::string("'") + key + "' must be an array of strings");
      T list;
      for (const auto& item : v) {
        if (!item.is_string()) throw UsageError(std::string("'") + key + "' must be an array of strings");
        list.push_back(item.get<std::string>());
      }
      c.*member = list;
    }
  };
}

#define CARL_FIELD(name, kind, commands, help) \
  Field { #name, Kind::kind, commands, help, setter(&RunConfig::name, #name) }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CARL_FIELD(chi, Real, kEigen | kEvolve | kSweep | kValidate, "effective coupling chi >= 0"),
      CARL_FIELD(delta, Real, kEigen | kEvolve | kSweep | kValidate, "pump-probe detuning in recoil units"),
      CARL_FIELD(alpha_re, Real, kAll & ~kMap, "real part of the injected probe amplitude"),
      CARL_FIELD(alpha_im, Real, kAll & ~kMap, "imaginary part of the injected probe amplitude"),
      CARL_FIELD(atom_count, Real, kEigen | kEvolve | kSweep | kMap, "condensate atom number N"),
      CARL_FIELD(tau_max, Real, kEvolve, "last time of the grid"),
      CARL_FIELD(tau_points, Integer, kEvolve, "number of grid times (>= 2)"),
      CARL_FIELD(propagator, String, kEvolve, "auto | exact | series | asymptotic"),
      CARL_FIELD(sweep_param, String, kSweep, "chi | delta | alpha_re | alpha_im | tau"),
      CARL_FIELD(sweep_lo, Real, kSweep, "first swept value"),
      CARL_FIELD(sweep_hi, Real, kSweep, "last swept value"),
      CARL_FIELD(sweep_steps, Integer, kSweep, "number of intervals (>= 1)"),
      CARL_FIELD(tau, Real, kSweep | kValidate, "evaluation time"),
      CARL_FIELD(chi_lo, Real, kMap, "first chi row"),
      CARL_FIELD(chi_hi, Real, kMap, "last chi row"),
      CARL_FIELD(chi_points, Integer, kMap, "number of chi rows"),
      CARL_FIELD(delta_lo, Real, kMap, "first delta column"),
      CARL_FIELD(delta_hi, Real, kMap, "last delta column"),
      CARL_FIELD(delta_points, Integer, kMap, "number of delta columns"),
      CARL_FIELD(cutoff_a, Integer, kValidate, "base probe cutoff"),
      CARL_FIELD(cutoff_minus, Integer, kValidate, "base c_- cutoff"),
      CARL_FIELD(cutoff_plus, Integer, kValidate, "base c_+ cutoff"),
      CARL_FIELD(time_step, Real, kValidate, "oracle integration step"),
      CARL_FIELD(convergence_tol, Real, kValidate, "ladder agreement and leakage tolerance"),
      CARL_FIELD(fraction_eps, Real, kEigen, "side-mode depletion limit for the validity horizon"),
      CARL_FIELD(probe_cap, Real, kEigen, "probe occupation limit for the validity horizon"),
      CARL_FIELD(output, String, kAll, "output file ('-' for stdout)"),
      CARL_FIELD(svg, String, kEvolve, "optional SVG plot file"),
      CARL_FIELD(svg_columns, List, kEvolve, "comma-separated columns to plot"),
      CARL_FIELD(svg_log, Boolean, kEvolve, "logarithmic y axis (true/false)"),
  };
  return table;
}

#undef CARL_FIELD

PhysicalParams parse_physical(const json& j) {
  if (!j.is_object()) throw UsageError("'physical' must be an object");
  PhysicalParams p{};
  std::map<std::string, double*> reals = {
      {"dipole_moment", &p.dipole_moment},
      {"cavity_length", &p.cavity_length},
      {"mode_cross_section", &p.mode_cross_section},
      {"detuning_Delta", &p.detuning_Delta},
      {"pump_frequency_omega0", &p.pump_frequency_omega0},
      {"probe_wavenumber_k", &p.probe_wavenumber_k},
      {"pump_wavenumber_k0", &p.pump_wavenumber_k0},
      {"atom_count_N", &p.atom_count_N},
      {"atom_mass", &p.atom_mass},
  };
  bool have_rabi = false;
  std::size_t seen = 0;
  for (const auto& [key, value] : j.items()) {
    if (key == "pump_rabi_Omega0") {
      // number, or [re, im]
      if (value.is_array() && value.size() == 2) {
        p.pump_rabi_Omega0 = {as_real(value[0], key), as_real(value[1], key)};
      } else {
        p.pump_rabi_Omega0 = as_real(value, key);
      }
      have_rabi = true;
      continue;
    }
    const auto it = reals.find(key);
    if (it == reals.end()) throw UsageError("unknown key 'physical." + key + "'");
    *it->second = as_real(value, key);
    ++seen;
  }
  if (!have_rabi || seen != reals.size()) throw UsageError("'physical' block is missing fields");
  p.validate();
  return p;
}

std::optional<Command> command_from_name(const std::string& name) {
  if (name == "eigen") return kEigen;
  if (name == "evolve") return kEvolve;
  if (name == "sweep") return kSweep;
  if (name == "map") return kMap;
  if (name == "validate") return kValidate;
  return std::nullopt;
}

// ---------------------------------------------------------------- helpers

std::string num(double x) { return csv::format_number(x); }

std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

void emit(const RunConfig& config, std::ostream& out, const std::string& text) {
  if (config.output.empty() || config.output == "-") {
    out << text;
    return;
  }
  std::ofstream file(config.output, std::ios::binary);
  if (!file) throw UsageError("cannot open output file '" + config.output + "'");
  file << text;
  if (!file) throw UsageError("failed writing '" + config.output + "'");
}

std::vector<double> linspace(double lo, double hi, int points) {
  std::vector<double> v(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) v[k] = points == 1 ? lo : lo + (hi - lo) * k / (points - 1);
  return v;
}

struct Summary {
  Regime regime = Regime::Stable;
  Roots roots{};
  double gamma = 0.0;
  double omega = 0.0;
  Maybe f;
  std::optional<SpectralData> spectral;
};

Summary summarize(const ModelParams& model) {
  Summary s;
  s.roots = characteristic_roots(model);
  s.regime = classify_regime(s.roots);
  if (s.regime != Regime::Marginal) {
    s.spectral = eigensystem(model);
    s.roots = s.spectral->eigenvalues;
    s.gamma = s.spectral->gain_rate;
    s.omega = s.spectral->oscillation;
    if (std::isfinite(s.spectral->fluctuation_f)) s.f = s.spectral->fluctuation_f;
    return s;
  }
  // the degenerate (closest) pair carries the threshold behaviour
  int a = 0, b = 1;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(s.roots[i] - s.roots[j]) < std::abs(s.roots[a] - s.roots[b])) a = i, b = j;
    }
  }
  s.gamma = std::max({0.0, -s.roots[a].imag(), -s.roots[b].imag()});
  s.omega = 0.5 * (s.roots[a].real() + s.roots[b].real());
  return s;
}

PropagatorMatrix propagate(const ModelParams& model, const Summary& s, double tau) {
  return s.spectral ? propagate_exact(*s.spectral, tau) : propagate_series(model, tau);
}

// ---------------------------------------------------------------- commands

int cmd_eigen(const RunConfig& config, std::ostream& out) {
  const ModelParams model = resolve_model(config);
  const Summary s = summarize(model);

  std::ostringstream os;
  os << "chi = " << num(model.chi) << "\n";
  os << "delta = " << num(model.delta) << "\n";
  os << "regime = " << regime_name(s.regime) << "\n";
  for (int k = 0; k < 3; ++k) {
    os << "lambda_" << k + 1 << " = " << num(s.roots[k].real()) << " " << (s.roots[k].imag() < 0 ? "-" : "+")
       << " " << num(std::abs(s.roots[k].imag())) << "i\n";
  }
  os << "Gamma = " << num(s.gamma) << "\n";
  os << "Omega = " << num(s.omega) << "\n";
  os << "f = " << csv::format_field(s.f) << "\n";
  Maybe horizon;
  if (s.spectral) {
    horizon = validity_horizon(*s.spectral, model, effective_atom_count(config), effective_probe_cap(config),
                               config.fraction_eps);
    os << "tau_valid = " << (std::isinf(*horizon) ? std::string("inf") : num(*horizon)) << "\n";
  }

  if (config.output.empty() || config.output == "-") {
    out << os.str();
    return kSuccess;
  }
  out << os.str();
  std::ostringstream table;
  table << "chi,delta,regime,lambda1_re,lambda1_im,lambda2_re,lambda2_im,lambda3_re,lambda3_im,Gamma,Omega,f,"
           "tau_valid\n";
  table << num(model.chi) << "," << num(model.delta) << "," << regime_name(s.regime);
  for (const auto& r : s.roots) table << "," << num(r.real()) << "," << num(r.imag());
  table << "," << num(s.gamma) << "," << num(s.omega) << "," << csv::format_field(s.f) << ","
        << (horizon && std::isinf(*horizon) ? std::string("inf") : csv::format_field(horizon)) << "\n";
  emit(config, out, table.str());
  return kSuccess;
}

int cmd_evolve(const RunConfig& config, std::ostream& out) {
  const ModelParams model = resolve_model(config);
  const double atoms = effective_atom_count(config);
  const std::vector<double> taus = linspace(0.0, config.tau_max, config.tau_points);

  std::optional<SpectralData> spectral;
  std::function<PropagatorMatrix(double)> step;
  bool check = true;
  if (config.propagator == "series") {
    step = [&](double t) { return propagate_series(model, t); };
  } else if (config.propagator == "auto") {
    try {
      spectral = eigensystem(model);
      step = [&](double t) { return propagate_exact(*spectral, t); };
    } catch (const DegenerateSpectrumError&) {
      step = [&](double t) { return propagate_series(model, t); };
    }
  } else {
    spectral = eigensystem(model);
    if (config.propagator == "exact") {
      step = [&](double t) { return propagate_exact(*spectral, t); };
    } else {
      if (spectral->regime != Regime::Unstable) {
        throw RegimeError(std::string("asymptotic propagator needs an UNSTABLE spectrum, got ") +
                          regime_name(spectral->regime));
      }
      step = [&](double t) { return propagate_asymptotic(*spectral, t); };
      check = false;
    }
  }

  const auto records = parallel_map(taus.size(), [&](std::size_t k) {
    return observables(step(taus[k]), model.alpha, atoms, check);
  });

  std::string text = csv::evolve_header() + "\n";
  for (const auto& rec : records) text += csv::evolve_row(rec) + "\n";
  emit(config, out, text);

  if (!config.svg.empty()) {
    const auto& columns = csv::evolve_columns();
    std::vector<svg::Series> series;
    for (const auto& name : config.svg_columns) {
      const auto it = std::find(columns.begin(), columns.end(), name);
      if (it == columns.end()) throw UsageError("unknown svg column '" + name + "'");
      const auto col = static_cast<std::size_t>(it - columns.begin());
      svg::Series s{name, {}};
      for (const auto& rec : records) s.y.push_back(csv::evolve_values(rec)[col]);
      series.push_back(std::move(s));
    }
    svg::PlotOptions options;
    options.title = "chi = " + short_num(model.chi) + ", delta = " + short_num(model.delta);
    options.log_y = config.svg_log;
    std::ofstream file(config.svg, std::ios::binary);
    if (!file) throw UsageError("cannot open svg file '" + config.svg + "'");
    file << svg::line_plot(taus, series, options);
  }
  return kSuccess;
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
  const std::string& param = config.sweep_param;
  const std::vector<double> values = linspace(config.sweep_lo, config.sweep_hi, config.sweep_steps + 1);
  const double atoms = effective_atom_count(config);

  RunConfig base = config;
  if (param == "chi" && !base.chi && !base.physical) base.chi = 0.0;
  if (param == "delta" && !base.delta && !base.physical) base.delta = 0.0;
  const ModelParams base_model = resolve_model(base);

  struct Row {
    Summary summary;
    ObservablesRecord rec;
  };
  const auto rows = parallel_map(values.size(), [&](std::size_t k) {
    ModelParams model = base_model;
    double tau = config.tau.value_or(1.0);
    const double v = values[k];
    if (param == "chi") model.chi = v;
    if (param == "delta") model.delta = v;
    if (param == "alpha_re") model.alpha = {v, model.alpha.imag()};
    if (param == "alpha_im") model.alpha = {model.alpha.real(), v};
    if (param == "tau") tau = v;
    model.validate();
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    Row row;
    row.summary = summarize(model);
    row.rec = observables(propagate(model, row.summary, tau), model.alpha, atoms);
    return row;
  });

  const bool own_column = param != "tau";
  std::string text = (own_column ? param + "," : "") + "regime,Gamma,f," + csv::evolve_header() + "\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (own_column) text += num(values[k]) + ",";
    text += std::string(regime_name(r.summary.regime)) + "," + num(r.summary.gamma) + "," +
            csv::format_field(r.summary.f) + "," + csv::evolve_row(r.rec) + "\n";
  }
  emit(config, out, text);
  return kSuccess;
}

int cmd_map(const RunConfig& config, std::ostream& out) {
  const std::vector<double> chis = linspace(config.chi_lo, config.chi_hi, config.chi_points);
  const std::vector<double> deltas = linspace(config.delta_lo, config.delta_hi, config.delta_points);
  const double atoms = effective_atom_count(config);
  const cplx alpha = config.alpha();

  const auto rows = parallel_map(chis.size() * deltas.size(), [&](std::size_t k) {
    ModelParams model;
    model.chi = chis[k / deltas.size()];
    model.delta = deltas[k % deltas.size()];
    model.alpha = alpha;
    model.validate();
    const Summary s = summarize(model);

    Maybe tau_growth, g2, cs, margin;
    if (s.regime == Regime::Unstable) {
      // e^{2 Gamma tau} = 10^6
      tau_growth = 3.0 * std::log(10.0) / s.gamma;
      try {
        const auto rec = record(model, *s.spectral, *tau_growth, atoms);
        const auto& pair = rec.pair(Pair::AMinus);
        g2 = pair.g2;
        cs = pair.cs_bound;
        if (g2 && cs) margin = *g2 - *cs;
      } catch (const InvariantViolation&) {
        // too ill-conditioned to trust; leave the columns empty
      }
    }
    std::string line = num(model.chi) + "," + num(model.delta) + "," + regime_name(s.regime) + "," +
                       num(s.gamma) + "," + num(s.omega) + "," + csv::format_field(s.f) + "," +
                       csv::format_field(tau_growth) + "," + csv::format_field(g2) + "," +
                       csv::format_field(cs) + "," + csv::format_field(margin) + "\n";
    return line;
  });

  std::string text = "chi,delta,regime,Gamma,Omega,f,tau_growth,g2_aminus,cs_aminus,cs_margin\n";
  for (const auto& line : rows) text += line;
  emit(config, out, text);
  return kSuccess;
}

int cmd_validate(const RunConfig& config, std::ostream& out) {
  constexpr double kLowOrderTol = 1e-6;
  constexpr double kFourthOrderTol = 1e-4;

  const std::vector<double> chis = config.chi ? std::vector<double>{*config.chi} : std::vector<double>{0.1, 0.3, 0.5};
  const std::vector<double> deltas = config.delta ? std::vector<double>{*config.delta} : std::vector<double>{0.0, 1.0};
  const bool alpha_given = config.alpha_re || config.alpha_im;
  const std::vector<cplx> alphas = alpha_given ? std::vector<cplx>{config.alpha()} : std::vector<cplx>{0.0, 1.0};
  const std::vector<double> taus = config.tau ? std::vector<double>{*config.tau} : std::vector<double>{0.25, 0.5, 1.0};

  oracle::FockOracleConfig base;
  base.cutoff_a = config.cutoff_a;
  base.cutoff_minus = config.cutoff_minus;
  base.cutoff_plus = config.cutoff_plus;
  base.time_step = config.time_step;
  base.convergence_tol = config.convergence_tol;
  base.validate();

  struct Point {
    ModelParams model;
    double tau;
  };
  std::vector<Point> grid;
  for (double chi : chis) {
    for (double delta : deltas) {
      for (cplx alpha : alphas) {
        for (double tau : taus) grid.push_back({ModelParams{chi, delta, alpha}, tau});
      }
    }
  }
  for (const auto& p : grid) p.model.validate();

  const auto results = parallel_map(grid.size(), [&](std::size_t k) {
    return oracle::compare_with_wick(grid[k].model, grid[k].tau, base);
  });

  std::ostringstream report, table;
  table << "chi,delta,alpha_re,alpha_im,tau,low_order,fourth_order,rungs,pass\n";
  std::size_t passed = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& p = grid[k];
    const auto& d = results[k].difference;
    const bool ok = !d.definedness_mismatch && d.low_order <= kLowOrderTol && d.fourth_order <= kFourthOrderTol;
    passed += ok;
    report << (ok ? "PASS" : "FAIL") << " chi=" << short_num(p.model.chi) << " delta=" << short_num(p.model.delta)
           << " alpha=" << short_num(p.model.alpha.real()) << (p.model.alpha.imag() < 0 ? "-" : "+")
           << short_num(std::abs(p.model.alpha.imag())) << "i tau=" << short_num(p.tau)
           << " low_order=" << short_num(d.low_order) << " fourth_order=" << short_num(d.fourth_order)
           << " rungs=" << results[k].oracle.rungs;
    if (!ok && !d.worst_field.empty()) report << " worst=" << d.worst_field;
    if (d.definedness_mismatch) report << " definedness_mismatch";
    report << "\n";
    table << num(p.model.chi) << "," << num(p.model.delta) << "," << num(p.model.alpha.real()) << ","
          << num(p.model.alpha.imag()) << "," << num(p.tau) << "," << num(d.low_order) << ","
          << num(d.fourth_order) << "," << results[k].oracle.rungs << "," << (ok ? "true" : "false") << "\n";
  }
  report << "validate: " << passed << "/" << grid.size() << " points passed (moments <= " << short_num(kLowOrderTol)
         << ", fourth order <= " << short_num(kFourthOrderTol) << ")\n";

  if (config.output.empty() || config.output == "-") {
    out << report.str();
  } else {
    out << report.str();
    emit(config, out, table.str());
  }
  return passed == grid.size() ? kSuccess : kPhysicsError;
}

json cli_value(const Field& field, const std::string& text) {
  switch (field.kind) {
    case Kind::Real: {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != text.size()) throw UsageError(flag_name(field.key) + " expects a number");
      if (std::isinf(v)) return json(v > 0 ? "inf" : "-inf");
      return json(v);
    }
    case Kind::Integer: {
      std::size_t pos = 0;
      long long v = 0;
      try {
        v = std::stoll(text, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != text.size()) throw UsageError(flag_name(field.key) + " expects an integer");
      return json(v);
    }
    case Kind::Boolean:
      if (text == "true" || text == "1" || text == "yes") return json(true);
      if (text == "false" || text == "0" || text == "no") return json(false);
      throw UsageError(flag_name(field.key) + " expects true or false");
    case Kind::List: {
      json list = json::array();
      std::string item;
      std::istringstream is(text);
      while (std::getline(is, item, ',')) {
        if (!item.empty()) list.push_back(item);
      }
      return list;
    }
    case Kind::String:
      break;
  }
  return json(text);
}

}  // namespace

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw UsageError(msg);
  };
  auto finite = [](double x) { return std::isfinite(x); };
  need(command_from_name(command).has_value(), "unknown command '" + command + "'");
  need(!chi || (*chi >= 0.0 && finite(*chi)), "chi must be finite and >= 0");
  need(!delta || finite(*delta), "delta must be finite");
  need(std::isfinite(alpha().real()) && std::isfinite(alpha().imag()), "alpha must be finite");
  need(!atom_count || (*atom_count > 0.0 && finite(*atom_count)), "atom_count must be > 0");
  need(finite(tau_max) && tau_max >= 0.0, "tau_max must be finite and >= 0");
  need(tau_points >= 2, "tau_points must be >= 2");
  need(propagator == "auto" || propagator == "exact" || propagator == "series" || propagator == "asymptotic",
       "propagator must be auto, exact, series or asymptotic");
  need(sweep_steps >= 1, "sweep_steps must be >= 1");
  need(finite(sweep_lo) && finite(sweep_hi), "sweep range must be finite");
  need(!tau || (finite(*tau) && *tau >= 0.0), "tau must be finite and >= 0");
  if (command == "sweep") {
    need(sweep_param == "chi" || sweep_param == "delta" || sweep_param == "alpha_re" ||
             sweep_param == "alpha_im" || sweep_param == "tau",
         "sweep_param must be chi, delta, alpha_re, alpha_im or tau");
  }
  need(chi_points >= 1 && delta_points >= 1, "map needs at least one point per axis");
  need(finite(chi_lo) && finite(chi_hi) && chi_lo >= 0.0 && chi_hi >= 0.0, "map chi range must be >= 0");
  need(finite(delta_lo) && finite(delta_hi), "map delta range must be finite");
  need(cutoff_a >= 1 && cutoff_minus >= 1 && cutoff_plus >= 1, "cutoffs must be >= 1");
  need(time_step > 0.0 && finite(time_step), "time_step must be > 0");
  need(convergence_tol > 0.0 && convergence_tol < 1.0, "convergence_tol must lie in (0, 1)");
  need(fraction_eps > 0.0 && fraction_eps <= 1.0, "fraction_eps must lie in (0, 1]");
  need(!probe_cap || *probe_cap > 0.0, "probe_cap must be > 0");
}

void apply_json(RunConfig& config, const json& patch) {
  if (!patch.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    if (key == "command") {
      if (!value.is_string()) throw UsageError("'command' must be a string");
      config.command = value.get<std::string>();
      continue;
    }
    if (key == "physical") {
      config.physical = parse_physical(value);
      continue;
    }
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
    it->set(config, value);
  }
}

ModelParams resolve_model(const RunConfig& config) {
  std::optional<DerivedModel> derived;
  if (config.physical) derived = derive_model(*config.physical);
  if (!config.chi && !derived) throw UsageError("--chi is required (or a 'physical' block in --config)");
  if (!config.delta && !derived) throw UsageError("--delta is required (or a 'physical' block in --config)");
  ModelParams m;
  m.chi = config.chi ? *config.chi : derived->model.chi;
  m.delta = config.delta ? *config.delta : derived->model.delta;
  m.alpha = config.alpha();
  m.validate();
  return m;
}

double effective_atom_count(const RunConfig& config) {
  if (config.atom_count) return *config.atom_count;
  return config.physical ? config.physical->atom_count_N : 1.0;
}

double effective_probe_cap(const RunConfig& config) {
  if (config.probe_cap) return *config.probe_cap;
  return config.physical ? probe_occupation_cap(*config.physical) : std::numeric_limits<double>::infinity();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-mode CARL simulator: spectra, moments, sweeps and Fock-space validation", "carl"};
  app.require_subcommand(0, 1);
  std::string config_path;
  app.add_option("--config", config_path, "flat JSON config; command-line flags override its values");

  struct Sub {
    Command command;
    CLI::App* app;
    std::vector<std::pair<const Field*, CLI::Option*>> options;
  };
  std::map<std::string, std::string> storage;
  std::vector<Sub> subs;
  const std::vector<std::pair<Command, std::string>> names = {
      {kEigen, "eigen"}, {kEvolve, "evolve"}, {kSweep, "sweep"}, {kMap, "map"}, {kValidate, "validate"}};
  const std::map<Command, std::string> descriptions = {
      {kEigen, "eigenvalues, regime, growth rate and fluctuation function"},
      {kEvolve, "CSV time series of every observable"},
      {kSweep, "CSV of observables along one parameter at fixed tau"},
      {kMap, "CSV grid over (chi, delta) of regime, Gamma, f and CS margin"},
      {kValidate, "Fock-space oracle against the Gaussian engine"}};
  for (const auto& [command, name] : names) {
    Sub sub{command, app.add_subcommand(name, descriptions.at(command)), {}};
    sub.app->fallthrough();
    for (const auto& field : fields()) {
      if (!(field.commands & command)) continue;
      sub.options.emplace_back(&field, sub.app->add_option(flag_name(field.key), storage[field.key], field.help));
    }
    subs.push_back(std::move(sub));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  const Sub* active = nullptr;
  for (const auto& sub : subs) {
    if (sub.app->parsed()) active = &sub;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      std::ifstream file(config_path);
      if (!file) throw UsageError("cannot read config file '" + config_path + "'");
      json j;
      try {
        j = json::parse(file);
      } catch (const json::exception& e) {
        throw UsageError("config file '" + config_path + "' is not valid JSON: " + e.what());
      }
      apply_json(config, j);
    }
    if (active) {
      const std::string name = active->app->get_name();
      if (!config.command.empty() && config.command != name) {
        throw UsageError("config file command '" + config.command + "' conflicts with subcommand '" + name + "'");
      }
      config.command = name;
      json patch = json::object();
      for (const auto& [field, option] : active->options) {
        if (option->count() > 0) patch[field->key] = cli_value(*field, storage[field->key]);
      }
      apply_json(config, patch);
    }
    if (config.command.empty()) throw UsageError("a subcommand is required: eigen, evolve, sweep, map or validate");
    config.validate();

    switch (*command_from_name(config.command)) {
      case kEigen: return cmd_eigen(config, out);
      case kEvolve: return cmd_evolve(config, out);
      case kSweep: return cmd_sweep(config, out);
      case kMap: return cmd_map(config, out);
      case kValidate: return cmd_validate(config, out);
      default: break;
    }
    throw UsageError("unknown command");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << "Run with --help for more information.\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const oracle::ConvergenceError& e) {
    err << "oracle error: " << e.what() << "\n";
    return kOracleError;
  } catch (const oracle::CutoffInsufficientError& e) {
    err << "oracle error: " << e.what() << "\n";
    return kOracleError;
  } catch (const oracle::ResourceError& e) {
    err << "oracle error: " << e.what() << "\n";
    return kOracleError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kPhysicsError;
  }
}

}  // namespace carl::cli

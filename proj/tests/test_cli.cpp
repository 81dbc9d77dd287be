#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "carl/csv.hpp"
#include "cli.hpp"
#include "oracles.hpp"

using namespace carl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("carl_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    REQUIRE(it != header.end());
    return static_cast<std::size_t>(it - header.begin());
  }
  double num(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
  const std::string& field(std::size_t row, const std::string& name) const { return rows[row][col(name)]; }
};

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  t.header = csv::split_line(line);
  while (std::getline(is, line)) t.rows.push_back(csv::split_line(line));
  return t;
}

}  // namespace

TEST_CASE("eigen: decoupled spectrum") {
  const Result r = run({"eigen", "--chi", "0", "--delta", "0.37"});
  REQUIRE(r.code == 0);
  auto kv = key_values(r.out);
  CHECK(kv["regime"] == "STABLE");
  CHECK(kv["lambda_1"] == "-1 + 0i");
  CHECK(kv["lambda_2"] == "0.37 + 0i");
  CHECK(kv["lambda_3"] == "1 + 0i");
  CHECK(kv["Gamma"] == "0");
}

TEST_CASE("eigen: growth regime matches the cubic oracle") {
  const Result r = run({"eigen", "--chi", "1", "--delta", "0"});
  REQUIRE(r.code == 0);
  auto kv = key_values(r.out);
  CHECK(kv["regime"] == "UNSTABLE");
  CHECK(std::stod(kv["Gamma"]) == doctest::Approx((double)ref::growth_rate(1.0L, 0.0L)).epsilon(1e-14));
}

TEST_CASE("eigen: threshold point reports MARGINAL") {
  const std::string chi = csv::format_number((double)ref::threshold_chi(0.0L));
  const Result r = run({"eigen", "--chi", chi, "--delta", "0"});
  REQUIRE(r.code == 0);
  CHECK(key_values(r.out)["regime"] == "MARGINAL");
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"eigen", "--chi", "1"}).code == 2);
  CHECK(run({"eigen", "--chi", "1"}).err.find("--delta") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"eigen", "--chi", "abc", "--delta", "0"}).code == 2);
  CHECK(run({"eigen", "--chi", "-1", "--delta", "0"}).code == 2);
  CHECK(run({"evolve", "--chi", "1", "--delta", "0", "--tau-points", "1"}).code == 2);
  CHECK(run({"sweep", "--chi", "1", "--delta", "0", "--sweep-param", "tau", "--sweep-steps", "0"}).code == 2);
  CHECK(run({"sweep", "--chi", "1", "--delta", "0", "--sweep-param", "gamma"}).code == 2);
  CHECK(run({"evolve", "--chi", "1", "--delta", "0", "--propagator", "magic"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("physics errors exit with 1") {
  CHECK(run({"evolve", "--chi", "0", "--delta", "0.5", "--propagator", "asymptotic"}).code == 1);
  const std::string chi = csv::format_number((double)ref::threshold_chi(0.0L));
  CHECK(run({"evolve", "--chi", chi, "--delta", "0", "--propagator", "exact"}).code == 1);
  CHECK(run({"evolve", "--chi", chi, "--delta", "0", "--tau-max", "2", "--tau-points", "3"}).code == 0);
}

TEST_CASE("evolve: header, row count and round-trip formatting") {
  const Result r = run({"evolve", "--chi", "0.8", "--delta", "0.3", "--alpha-re", "1", "--alpha-im", "-0.5",
                        "--tau-max", "4", "--tau-points", "9"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  CHECK(csv::split_line(r.out.substr(0, r.out.find('\n'))) == csv::evolve_columns());
  CHECK(t.header.size() == 26u);
  REQUIRE(t.rows.size() == 9u);

  const ModelParams m{0.8, 0.3, cplx(1.0, -0.5)};
  const SpectralData s = eigensystem(m);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const ObservablesRecord rec = record(m, s, 4.0 * k / 8.0);
    const auto values = csv::evolve_values(rec);
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (values[c] && std::isfinite(*values[c])) {
        CHECK(std::stod(t.rows[k][c]) == *values[c]);  // 17 digits round-trip exactly
      } else {
        CHECK(t.rows[k][c].empty());
      }
    }
  }
}

TEST_CASE("evolve: spontaneous run converges to thermal statistics with CS violation") {
  const Result r = run({"evolve", "--chi", "1", "--delta", "0", "--tau-max", "12", "--tau-points", "25"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  const double gamma = (double)ref::growth_rate(1.0L, 0.0L);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    if (std::exp(2 * gamma * t.num(k, "tau")) < 1e6) continue;
    for (const char* c : {"g2_a", "g2_minus", "g2_plus"}) CHECK(t.num(k, c) == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(t.num(k, "g2_aminus") > t.num(k, "cs_aminus"));
    CHECK(t.num(k, "g2_minusplus") > t.num(k, "cs_minusplus"));
    CHECK(t.num(k, "g2_aplus") <= t.num(k, "cs_aplus") * (1 + 1e-12));
  }
  CHECK(t.field(0, "g2_a").empty());
}

TEST_CASE("evolve: strong injected probe is nearly coherent") {
  const Result r = run({"evolve", "--chi", "1", "--delta", "0", "--alpha-re", "30", "--tau-max", "12",
                        "--tau-points", "13"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  const std::size_t last = t.rows.size() - 1;
  CHECK(t.num(last, "g2_a") >= 1.0);
  CHECK(t.num(last, "g2_a") <= 1.01);
}

TEST_CASE("evolve: decoupled intensities stay constant") {
  const Result r = run({"evolve", "--chi", "0", "--delta", "0.5", "--alpha-re", "2", "--tau-max", "10",
                        "--tau-points", "11"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    CHECK(t.num(k, "I_a") == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(std::abs(t.num(k, "I_minus")) <= 1e-14);
    CHECK(std::abs(t.num(k, "I_plus")) <= 1e-14);
  }
}

TEST_CASE("evolve: asymptotic and series propagators") {
  const Result a = run({"evolve", "--chi", "1", "--delta", "0", "--propagator", "asymptotic", "--tau-max", "10",
                        "--tau-points", "3"});
  const Result e = run({"evolve", "--chi", "1", "--delta", "0", "--propagator", "series", "--tau-max", "10",
                        "--tau-points", "3"});
  REQUIRE(a.code == 0);
  REQUIRE(e.code == 0);
  const Table ta = parse_csv(a.out), te = parse_csv(e.out);
  CHECK(ta.num(2, "I_minus") == doctest::Approx(te.num(2, "I_minus")).epsilon(1e-2));
}

TEST_CASE("output is byte-identical across runs and thread counts") {
  const std::vector<std::string> args = {"evolve", "--chi", "0.9", "--delta", "-0.2", "--alpha-re", "0.5",
                                         "--tau-max", "8", "--tau-points", "401"};
  const std::string first = run(args).out;
  CHECK(run(args).out == first);
  ::setenv("CARL_THREADS", "1", 1);
  const std::string serial = run(args).out;
  ::unsetenv("CARL_THREADS");
  CHECK(serial == first);

  const fs::path file = scratch_dir() / "evolve.csv";
  auto with_file = args;
  with_file.insert(with_file.end(), {"--output", file.string()});
  REQUIRE(run(with_file).code == 0);
  CHECK(slurp(file) == first);
}

TEST_CASE("svg plot") {
  const fs::path svg = scratch_dir() / "plot.svg";
  const std::vector<std::string> args = {"evolve", "--chi", "1", "--delta", "0", "--tau-max", "5",
                                         "--tau-points", "51", "--svg", svg.string(), "--output",
                                         (scratch_dir() / "plot.csv").string()};
  REQUIRE(run(args).code == 0);
  const std::string first = slurp(svg);
  CHECK(first.rfind("<svg", 0) == 0);
  CHECK(first.find("I_minus") != std::string::npos);
  REQUIRE(run(args).code == 0);
  CHECK(slurp(svg) == first);
  auto bad = args;
  bad.insert(bad.end(), {"--svg-columns", "nope"});
  CHECK(run(bad).code == 2);
}

TEST_CASE("sweep over chi crosses the threshold") {
  const Result r = run({"sweep", "--delta", "0", "--sweep-param", "chi", "--sweep-lo", "0", "--sweep-hi", "1",
                        "--sweep-steps", "10", "--tau", "2"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  REQUIRE(t.rows.size() == 11u);
  CHECK(t.header[0] == "chi");
  CHECK(t.field(0, "regime") == "STABLE");
  CHECK(t.field(10, "regime") == "UNSTABLE");
  for (std::size_t k = 0; k < t.rows.size(); ++k) CHECK(t.num(k, "tau") == 2.0);
  CHECK(t.num(10, "Gamma") == doctest::Approx((double)ref::growth_rate(1.0L, 0.0L)).epsilon(1e-13));

  const Result tau = run({"sweep", "--chi", "1", "--delta", "0", "--sweep-param", "tau", "--sweep-hi", "3",
                          "--sweep-steps", "3"});
  REQUIRE(tau.code == 0);
  const Table tt = parse_csv(tau.out);
  CHECK(tt.header[0] == "regime");
  CHECK(tt.num(3, "tau") == 3.0);
}

TEST_CASE("map: zero coupling row, gain ordering and the fluctuation function") {
  const Result r = run({"map", "--chi-lo", "0", "--chi-hi", "1", "--chi-points", "11", "--delta-lo", "-4",
                        "--delta-hi", "4", "--delta-points", "81"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  REQUIRE(t.rows.size() == 11u * 81u);
  CHECK(t.header == std::vector<std::string>{"chi", "delta", "regime", "Gamma", "Omega", "f", "tau_growth",
                                              "g2_aminus", "cs_aminus", "cs_margin"});
  for (std::size_t k = 0; k < 81; ++k) CHECK(t.num(k, "Gamma") == 0.0);

  // rows are chi-major: chi = 0.1 is row block 1, chi = 1 block 10
  for (std::size_t d = 0; d < 81; ++d) {
    const double g01 = t.num(81 + d, "Gamma"), g1 = t.num(810 + d, "Gamma");
    CHECK(t.num(810 + d, "chi") == 1.0);
    if (g1 > 0 || g01 > 0) {
      CHECK(g1 > g01);
    }
  }
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    if (t.field(k, "regime") != "UNSTABLE") {
      CHECK(t.field(k, "cs_margin").empty());
      continue;
    }
    CHECK(t.num(k, "f") >= 1.0 - 1e-12);
    if (!t.field(k, "cs_margin").empty()) CHECK(t.num(k, "cs_margin") > 0.0);
  }
}

TEST_CASE("map: f is close to one where the gain peaks") {
  const Result r = run({"map", "--chi-lo", "0.2", "--chi-hi", "0.2", "--chi-points", "1", "--delta-lo", "-4",
                        "--delta-hi", "4", "--delta-points", "400"});
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  std::size_t best = 0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    if (t.num(k, "Gamma") > t.num(best, "Gamma")) best = k;
  }
  CHECK(t.num(best, "Gamma") > 0.0);
  CHECK(std::abs(t.num(best, "f") - 1.0) <= 0.2);
  CHECK(t.num(best, "delta") == doctest::Approx(0.9724310776942353).epsilon(1e-12));
}

TEST_CASE("config file values and flag precedence") {
  const fs::path config = scratch_dir() / "run.json";
  {
    std::ofstream(config) << R"({"command": "eigen", "chi": 0.5, "delta": 0.0})";
  }
  auto kv = key_values(run({"--config", config.string()}).out);
  CHECK(kv["chi"] == "0.5");
  kv = key_values(run({"eigen", "--config", config.string(), "--chi", "1"}).out);
  CHECK(kv["chi"] == "1");
  CHECK(kv["regime"] == "UNSTABLE");
  CHECK(run({"evolve", "--config", config.string()}).code == 2);  // conflicting command

  {
    std::ofstream(config) << R"({"chi": 0.5, "delta": 0.0, "tau_pointz": 3})";
  }
  CHECK(run({"evolve", "--config", config.string()}).code == 2);
  {
    std::ofstream(config) << R"({"chi": "big", "delta": 0.0})";
  }
  CHECK(run({"eigen", "--config", config.string()}).code == 2);
  CHECK(run({"eigen", "--config", (scratch_dir() / "missing.json").string()}).code == 2);
}

TEST_CASE("physical parameter block") {
  const fs::path config = scratch_dir() / "physical.json";
  {
    std::ofstream(config) << R"({"physical": {
      "dipole_moment": 1.0, "cavity_length": 1.0, "mode_cross_section": 1.0, "detuning_Delta": 2.0,
      "pump_rabi_Omega0": [0.0, 8.0], "pump_frequency_omega0": 1.0, "probe_wavenumber_k": 1e-30,
      "pump_wavenumber_k0": 1.0, "atom_count_N": 4.0, "atom_mass": 1.0}})";
  }
  PhysicalParams p{};
  p.dipole_moment = 1.0;
  p.cavity_length = 1.0;
  p.mode_cross_section = 1.0;
  p.detuning_Delta = 2.0;
  p.pump_rabi_Omega0 = {0.0, 8.0};
  p.pump_frequency_omega0 = 1.0;
  p.probe_wavenumber_k = 1e-30;
  p.pump_wavenumber_k0 = 1.0;
  p.atom_count_N = 4.0;
  p.atom_mass = 1.0;
  const DerivedModel d = derive_model(p);
  const Result r = run({"eigen", "--config", config.string()});
  REQUIRE(r.code == 0);
  auto kv = key_values(r.out);
  CHECK(std::stod(kv["chi"]) == d.model.chi);
  CHECK(std::stod(kv["delta"]) == d.model.delta);
  kv = key_values(run({"eigen", "--config", config.string(), "--chi", "0.25"}).out);
  CHECK(kv["chi"] == "0.25");
}

TEST_CASE("validate: single grid point passes, starved cutoffs do not converge") {
  const Result ok = run({"validate", "--chi", "0.3", "--delta", "1", "--alpha-re", "1", "--tau", "0.5"});
  CHECK(ok.code == 0);
  CHECK(ok.out.rfind("PASS", 0) == 0);
  CHECK(ok.out.find("1/1 points passed") != std::string::npos);

  const Result starved = run({"validate", "--chi", "2", "--delta", "0", "--tau", "3", "--cutoff-a", "2",
                              "--cutoff-minus", "2", "--cutoff-plus", "2"});
  CHECK(starved.code == 3);
}

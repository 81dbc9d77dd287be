#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "carl/oracle.hpp"
#include "oracles.hpp"

using namespace carl;
using namespace carl::oracle;

namespace {

FockOracleConfig cutoffs(int na, int nm, int np) {
  FockOracleConfig c;
  c.cutoff_a = na;
  c.cutoff_minus = nm;
  c.cutoff_plus = np;
  return c;
}

cplx braket(const FockState& s, const SparseMatrix& op) {
  return s.amplitudes.dot(op * s.amplitudes);
}

}  // namespace

TEST_CASE("basis enumeration is lexicographic") {
  const FockBasis b(2, 3, 1);
  CHECK(b.size() == 3u * 4u * 2u);
  CHECK(b.index(0, 0, 0) == 0u);
  CHECK(b.index(0, 0, 1) == 1u);
  CHECK(b.index(0, 1, 0) == 2u);
  CHECK(b.index(1, 0, 0) == 8u);
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto n = b.occupation(k);
    CHECK(b.index(n[0], n[1], n[2]) == k);
    CHECK(b.charge(k) == n[0] - n[1] + n[2]);
  }
  CHECK_FALSE(b.contains(3, 0, 0));
  CHECK(b.contains(2, 3, 1));
}

TEST_CASE("decoupled Hamiltonian is diagonal") {
  const double delta = 0.7;
  const auto config = cutoffs(3, 2, 2);
  const SparseMatrix h = build_hamiltonian({0.0, delta, 0.0}, config);
  const FockBasis b(3, 2, 2);
  for (int k = 0; k < h.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
      if (it.value() == cplx(0.0)) continue;
      CHECK(it.row() == it.col());
      const auto n = b.occupation(static_cast<std::size_t>(it.row()));
      CHECK(it.value() == cplx(n[2] + n[1] - delta * n[0], 0.0));
    }
  }
}

TEST_CASE("eight-dimensional space: hand-enumerated elements") {
  const double chi = 1.0;
  const Eigen::MatrixXcd h = Eigen::MatrixXcd(build_hamiltonian({chi, 0.0, 0.0}, cutoffs(1, 1, 1)));
  REQUIRE(h.rows() == 8);
  const FockBasis b(1, 1, 1);
  // a^dag c_-^dag |000> = |110>
  CHECK(h(b.index(1, 1, 0), b.index(0, 0, 0)) == cplx(chi));
  // a^dag c_+ |001> = |100>
  CHECK(h(b.index(1, 0, 0), b.index(0, 0, 1)) == cplx(chi));
  // |100> and |010> carry different charge
  CHECK(h(b.index(1, 0, 0), b.index(0, 1, 0)) == cplx(0.0));
  CHECK(h(b.index(1, 1, 1), b.index(1, 1, 1)) == cplx(2.0));
}

TEST_CASE("sparse Hamiltonian equals the Kronecker-product construction") {
  for (const auto& m : {ModelParams{0.37, -1.2, 0.0}, ModelParams{1.5, 0.4, 0.0}}) {
    const Eigen::MatrixXcd sparse = Eigen::MatrixXcd(build_hamiltonian(m, cutoffs(3, 4, 2)));
    const Eigen::MatrixXcd dense = ref::DenseModes(3, 4, 2).hamiltonian(m.chi, m.delta);
    CHECK((sparse - dense).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((sparse - sparse.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("Hamiltonian commutes with the charge exactly") {
  const auto config = cutoffs(4, 5, 3);
  const SparseMatrix h = build_hamiltonian({0.9, 0.3, 0.0}, config);
  const SparseMatrix q = charge_operator(FockBasis(4, 5, 3));
  const SparseMatrix commutator = SparseMatrix(h * q) - SparseMatrix(q * h);
  double worst = 0.0;
  for (int k = 0; k < commutator.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(commutator, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  CHECK(worst == 0.0);
}

TEST_CASE("resource budget") {
  auto config = cutoffs(200, 200, 200);
  CHECK_THROWS_AS(build_hamiltonian({0.1, 0.0, 0.0}, config), ResourceError);
  config = cutoffs(0, 2, 2);
  CHECK_THROWS(config.validate());
}

TEST_CASE("decoupled evolution keeps occupations") {
  const ModelParams m{0.0, 0.6, cplx(1.0, 0.0)};
  const FockState s0 = initial_state(m, cutoffs(16, 2, 2));
  const FockState s = evolve(m, cutoffs(16, 2, 2), 2.5);
  const double n0 = expect_diagonal(s0, [](int na, int, int) { return (double)na; });
  const double n1 = expect_diagonal(s, [](int na, int, int) { return (double)na; });
  CHECK(n1 == doctest::Approx(n0).epsilon(1e-12));
  // each Fock component picks up exp(i delta n tau)
  for (int n = 0; n <= 3; ++n) {
    const auto k = (Eigen::Index)s.basis.index(n, 0, 0);
    CHECK(std::abs(s.amplitudes(k) - s0.amplitudes(k) * std::exp(cplx(0, 0.6 * n * 2.5))) <= 1e-10);
  }
}

TEST_CASE("probe occupation matches the Gaussian engine") {
  const ModelParams m{0.3, 1.0, 0.0};
  const FockState s = evolve(m, cutoffs(8, 8, 8), 0.5);
  const double wick = intensities(propagate_auto(m, 0.5), 0.0).probe;
  CHECK(std::abs(expect_diagonal(s, [](int na, int, int) { return (double)na; }) - wick) <= 1e-6);
}

TEST_CASE("charge, energy and norm are conserved") {
  const ModelParams m{0.5, 0.3, cplx(0.8, 0.3)};
  const auto config = cutoffs(20, 20, 16);
  const FockState s0 = initial_state(m, config);
  const SparseMatrix h = build_hamiltonian(m, config);
  const auto charge = [](int na, int nm, int np) { return (double)(na - nm + np); };
  const double q0 = expect_diagonal(s0, charge);
  const double e0 = braket(s0, h).real();
  for (double tau : {0.3, 0.7, 1.0}) {
    const FockState s = evolve(m, config, tau);
    CHECK(std::abs(expect_diagonal(s, charge) - q0) <= 1e-9);
    CHECK(std::abs(braket(s, h).real() - e0) <= 1e-9);
    CHECK(std::abs(s.amplitudes.norm() - 1.0) <= 1e-9 * tau);
  }
}

TEST_CASE("charge blocks and the full matrix give the same state") {
  const ModelParams m{0.4, -0.5, cplx(0.5, 0.5)};
  auto a = cutoffs(16, 18, 14);
  auto b = a;
  b.use_charge_blocks = false;
  const FockState x = evolve(m, a, 0.8), y = evolve(m, b, 0.8);
  CHECK((x.amplitudes - y.amplitudes).norm() <= 1e-12);
}

TEST_CASE("vacuum and coherent oracle records") {
  const FockState vac = evolve({0.0, 0.0, 0.0}, cutoffs(2, 2, 2), 0.0);
  const ObservablesRecord r = oracle_moments(vac);
  for (Mode mode : kModes) {
    CHECK(r.intensity[mode] == 0.0);
    CHECK_FALSE(r.g2_of(mode).has_value());
  }
  const FockState coh = initial_state({0.5, 0.0, cplx(1.0, 0.0)}, cutoffs(16, 2, 2));
  CHECK(*oracle_moments(coh).g2_of(Mode::Probe) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(coh.truncated_weight < 1e-12);
}

TEST_CASE("truncation and leakage errors") {
  CHECK_THROWS_AS(initial_state({0.1, 0.0, cplx(5.0, 0.0)}, cutoffs(4, 2, 2)), CutoffInsufficientError);
  try {
    evolve({1.5, 0.0, 0.0}, cutoffs(3, 3, 3), 2.0);
    FAIL("expected a cutoff error");
  } catch (const CutoffInsufficientError& e) {
    CHECK(e.leakage() > 1e-9);
    CHECK(std::string(e.what()).find(mode_name(e.mode())) != std::string::npos);
  }
}

TEST_CASE("state stays Gaussian: Wick factorization of <n_a n_->") {
  const ModelParams m{0.5, 1.0, 0.0};
  const FockState s = evolve(m, cutoffs(22, 22, 16), 1.0);
  const double nn = expect_diagonal(s, [](int na, int nm, int) { return (double)(na * nm); });
  const double na = expect_diagonal(s, [](int a, int, int) { return (double)a; });
  const double nm = expect_diagonal(s, [](int, int b, int) { return (double)b; });
  const cplx anomalous = expect_lowering(s, 1, 1, 0);
  // for alpha = 0, <a c_+^dag> and <c_-^dag c_+^dag> type terms also vanish by charge
  CHECK(std::abs(nn - (na * nm + std::norm(anomalous))) <= 1e-6);
}

TEST_CASE("oracle matches the Gaussian engine at a short growth-regime point") {
  const ModelParams m{0.5, 0.0, cplx(1.0, 0.0)};
  const WickComparison c = compare_with_wick(m, 1.0, FockOracleConfig{});
  CHECK_FALSE(c.difference.definedness_mismatch);
  CHECK(c.difference.low_order <= 1e-6);
  CHECK(c.difference.fourth_order <= 1e-4);
  CHECK(std::abs(*c.oracle.record.g2_of(Mode::Probe) - *c.wick.g2_of(Mode::Probe)) <= 1e-4);
  CHECK(c.oracle.certificate <= FockOracleConfig{}.convergence_tol);
}

TEST_CASE("ladder gives up when cutoffs cannot hold the state") {
  CHECK_THROWS_AS(convergence_ladder({2.0, 0.0, 0.0}, 3.0, cutoffs(3, 3, 3)), ConvergenceError);
}

TEST_CASE("record comparison flags definedness mismatches") {
  ObservablesRecord a, b;
  a.g2[0] = 2.0;
  CHECK(compare_records(a, b).definedness_mismatch);
  b.g2[0] = 2.0 + 1e-5;
  const RecordDifference d = compare_records(a, b);
  CHECK_FALSE(d.definedness_mismatch);
  CHECK(d.fourth_order == doctest::Approx(1e-5 / (2.0 + 1e-5)));
}

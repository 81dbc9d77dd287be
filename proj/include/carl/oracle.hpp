#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "carl/moments.hpp"

namespace carl::oracle {

// Exact Schroedinger evolution of the three-mode Hamiltonian
//   H / hbar omega_r = n_+ + n_- - delta n_a + chi (a^dag c_-^dag + a^dag c_+ + c_+^dag a + c_- a)
// in a truncated Fock space. Used as the brute-force reference for the
// Gaussian engine in moments.hpp.

struct FockOracleConfig {
  int cutoff_a = 16;
  int cutoff_minus = 16;
  int cutoff_plus = 12;
  double time_step = 0.05;
  double truncation_tol = 1e-12;
  double convergence_tol = 1e-9;
  bool use_charge_blocks = true;
  std::size_t max_dimension = 4'000'000;

  void validate() const;
  /// Cutoffs multiplied by `factor` and rounded up.
  FockOracleConfig scaled(double factor) const;
};

class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

class CutoffInsufficientError : public std::runtime_error {
 public:
  CutoffInsufficientError(Mode mode, double leakage, const std::string& what)
      : std::runtime_error(what), mode_(mode), leakage_(leakage) {}
  Mode mode() const { return mode_; }
  double leakage() const { return leakage_; }

 private:
  Mode mode_;
  double leakage_;
};

class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Lexicographic (n_a, n_-, n_+) basis with n_i <= cutoff_i.
class FockBasis {
 public:
  FockBasis() = default;
  FockBasis(int cutoff_a, int cutoff_minus, int cutoff_plus);

  std::size_t size() const { return size_; }
  const std::array<int, 3>& cutoffs() const { return cutoffs_; }
  std::size_t index(int n_a, int n_minus, int n_plus) const;
  std::array<int, 3> occupation(std::size_t index) const;
  bool contains(int n_a, int n_minus, int n_plus) const;
  /// Conserved charge n_a - n_- + n_+ of a basis state.
  int charge(std::size_t index) const;

 private:
  std::array<int, 3> cutoffs_{};
  std::size_t size_ = 0;
};

using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

/// Hamiltonian in recoil units. Throws ResourceError when the basis exceeds
/// config.max_dimension.
SparseMatrix build_hamiltonian(const ModelParams& model, const FockOracleConfig& config);

/// Diagonal charge operator Q = n_a - n_- + n_+.
SparseMatrix charge_operator(const FockBasis& basis);

struct FockState {
  FockBasis basis;
  Eigen::VectorXcd amplitudes;
  double tau = 0.0;
  cplx alpha = 0.0;
  double norm = 1.0;
  double truncated_weight = 0.0;  // coherent-state weight dropped above cutoff_a
  double leakage = 0.0;           // max weight seen within one excitation of a cutoff
  Mode leakiest_mode = Mode::Probe;
};

/// Truncated, renormalized |alpha, 0, 0>. Throws CutoffInsufficientError
/// if the dropped weight reaches config.truncation_tol.
FockState initial_state(const ModelParams& model, const FockOracleConfig& config);

/// State at tau from Taylor steps of exp(-i H dt). Throws
/// CutoffInsufficientError when the leakage exceeds config.convergence_tol.
FockState evolve(const ModelParams& model, const FockOracleConfig& config, double tau);

/// Same observables as moments::observables, from direct matrix elements
/// (no Gaussian assumption). Record invariants are not enforced here.
ObservablesRecord oracle_moments(const FockState& state, double atom_count = 1.0);

/// <psi| a^ka c_-^km c_+^kp |psi>
cplx expect_lowering(const FockState& state, int ka, int km, int kp);
/// <psi| f(n_a, n_-, n_+) |psi> for a diagonal observable.
template <typename F>
double expect_diagonal(const FockState& state, F&& f) {
  double sum = 0.0;
  for (std::size_t k = 0; k < state.basis.size(); ++k) {
    const auto n = state.basis.occupation(k);
    sum += std::norm(state.amplitudes(static_cast<Eigen::Index>(k))) * f(n[0], n[1], n[2]);
  }
  return sum;
}

/// Named scalar view of a record, split by moment order.
struct RecordField {
  std::string name;
  Maybe value;
  bool fourth_order;
};
std::vector<RecordField> record_fields(const ObservablesRecord& rec);

struct RecordDifference {
  double low_order = 0.0;     // means, intensities, uncertainties, bunching
  double fourth_order = 0.0;  // g2, cross g2 and their bounds
  std::string worst_field;
  bool definedness_mismatch = false;
};

/// Max over shared fields of |x - y| / max(1, |y|). A field defined in one
/// record and UNDEFINED in the other is a definedness mismatch.
RecordDifference compare_records(const ObservablesRecord& x, const ObservablesRecord& y);

struct ConvergedRecord {
  ObservablesRecord record;
  FockOracleConfig config;  // rung that produced `record`
  double certificate = 0.0; // max field difference to the previous rung
  int rungs = 0;
};

/// Runs evolve at cutoffs x1, x1.5, x2 and returns the first rung that
/// agrees with its predecessor to convergence_tol in every field. Throws
/// ConvergenceError if the x2 rung still disagrees.
ConvergedRecord convergence_ladder(const ModelParams& model, double tau, const FockOracleConfig& base,
                                   double atom_count = 1.0);

struct WickComparison {
  ConvergedRecord oracle;
  ObservablesRecord wick;
  RecordDifference difference;  // oracle relative to wick
};

/// Ladder-converged oracle record next to the Gaussian-engine record at
/// the same (model, tau). Throws ConvergenceError like convergence_ladder.
WickComparison compare_with_wick(const ModelParams& model, double tau, const FockOracleConfig& base,
                                 double atom_count = 1.0);

}  // namespace carl::oracle

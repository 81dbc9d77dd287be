#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

#include "carl/propagator.hpp"

namespace carl {

/// Optional-valued observable; std::nullopt is the UNDEFINED sentinel
/// (0/0 correlation functions, phase of a vanishing mean).
using Maybe = std::optional<double>;

/// Intensities below this are treated as zero when normalizing correlations.
inline constexpr double kIntensityFloor = 1e-14;

class InvariantViolation : public std::logic_error {
 public:
  explicit InvariantViolation(const std::string& what) : std::logic_error(what) {}
};

/// Operator linear in the initial-time fluctuations,
///   X = mean + sum_k coeff[k] e_k,
/// over the basis e = (da, da^dag, dc_-, dc_-^dag, dc_+, dc_+^dag).
struct LinearOperator {
  cplx mean = 0.0;
  std::array<cplx, 6> coeff{};

  LinearOperator adjoint() const;
  LinearOperator operator+(const LinearOperator& other) const;
  LinearOperator operator*(cplx s) const;
};

/// Gaussian-state expectation values for the state |alpha, 0, 0> evolved
/// by a propagator U. All moments reduce, by Wick's theorem, to the
/// initial contractions <da da^dag> = <dc_- dc_-^dag> = <dc_+ dc_+^dag> = 1.
class WickEngine {
 public:
  WickEngine(const PropagatorMatrix& u, cplx alpha);

  /// Annihilation operator of physical mode i at time tau (a, c_-, c_+).
  const LinearOperator& annihilator(Mode i) const { return annihilators_[idx(i)]; }
  LinearOperator creator(Mode i) const { return annihilators_[idx(i)].adjoint(); }

  static cplx contraction(const LinearOperator& x, const LinearOperator& y);  // fluctuation parts only
  cplx expect(const LinearOperator& x, const LinearOperator& y) const;
  cplx expect(const LinearOperator& w, const LinearOperator& x, const LinearOperator& y,
              const LinearOperator& z) const;

  const PropagatorMatrix& propagator() const { return u_; }
  cplx alpha() const { return alpha_; }

 private:
  PropagatorMatrix u_;
  cplx alpha_;
  std::array<LinearOperator, 3> annihilators_;
};

struct MeanFields {
  cplx probe;  // <a>
  cplx minus;  // <c_->
  cplx plus;   // <c_+>

  cplx operator[](Mode m) const { return m == Mode::Probe ? probe : (m == Mode::Minus ? minus : plus); }
};

struct Intensities {
  double probe = 0.0;
  double minus = 0.0;
  double plus = 0.0;

  double operator[](Mode m) const { return m == Mode::Probe ? probe : (m == Mode::Minus ? minus : plus); }
};

struct CrossCorrelation {
  Maybe g2;
  Maybe cs_bound;       // sqrt(g2_i g2_j)
  Maybe quantum_bound;  // sqrt((g2_i + 1/I_i)(g2_j + 1/I_j))
  bool violates_cs = false;
};

struct Uncertainty {
  Maybe relative_amplitude;  // Delta l / l
  Maybe phase;               // Delta phi
};

struct Bunching {
  cplx mean;         // <B>
  double intensity;  // <B^dag B>
};

MeanFields mean_fields(const PropagatorMatrix& u, cplx alpha);

/// Closed form I_i = |alpha|^2 |u_ia|^2 + |u_i-|^2 - delta_{i,-}.
Intensities intensities(const PropagatorMatrix& u, cplx alpha);
/// Same quantity from the Wick contractions <b_i^dag b_i>.
Intensities intensities_wick(const PropagatorMatrix& u, cplx alpha);

Maybe g2_single(const PropagatorMatrix& u, cplx alpha, Mode i);
CrossCorrelation g2_cross(const PropagatorMatrix& u, cplx alpha, Mode i, Mode j);

/// Throws std::invalid_argument for alpha == 0.
Uncertainty phase_amplitude_uncertainty(const PropagatorMatrix& u, cplx alpha, Mode i);

/// B = (c_-^dag + c_+) / sqrt(N).
Bunching bunching(const PropagatorMatrix& u, cplx alpha, double atom_count);

/// Bounds and flag from single-mode values; shared with the Fock oracle.
CrossCorrelation correlation_bounds(Maybe g2_ij, Maybe g2_i, Maybe g2_j, double intensity_i,
                                    double intensity_j);

enum class Pair : int { AMinus = 0, APlus = 1, MinusPlus = 2 };
inline constexpr std::array<Pair, 3> kPairs = {Pair::AMinus, Pair::APlus, Pair::MinusPlus};
std::array<Mode, 2> pair_modes(Pair p);
const char* pair_name(Pair p);

struct ObservablesRecord {
  double tau = 0.0;
  MeanFields means{};
  Intensities intensity{};
  std::array<Maybe, 3> g2{};                // indexed by Mode
  std::array<CrossCorrelation, 3> cross{};  // indexed by Pair
  std::array<Uncertainty, 3> uncertainty{};  // indexed by Mode
  Bunching bunch{};
  double depletion_fraction = 0.0;  // (I_- + I_+) / N

  const CrossCorrelation& pair(Pair p) const { return cross[static_cast<int>(p)]; }
  Maybe g2_of(Mode m) const { return g2[idx(m)]; }
};

/// Every observable at one propagator. Asserts the record invariants
/// (conserved charge, non-negativity, quantum bound) and throws
/// InvariantViolation if one fails. The asymptotic propagator is not
/// pseudo-unitary, so records built from it pass check_invariants = false.
ObservablesRecord observables(const PropagatorMatrix& u, cplx alpha, double atom_count = 1.0,
                              bool check_invariants = true);

/// observables(propagate_exact(spectral, tau), model.alpha, atom_count)
ObservablesRecord record(const ModelParams& model, const SpectralData& spectral, double tau,
                         double atom_count = 1.0);

/// Checks the record invariants; returns an empty string when all hold.
std::string check_record_invariants(const ObservablesRecord& rec, cplx alpha);

}  // namespace carl

#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "carl/model.hpp"

namespace carl {

using Mat3 = Eigen::Matrix3cd;
using Vec3 = Eigen::Vector3cd;
using Roots = std::array<cplx, 3>;

/// Mode index order shared by every 3x3 object: (probe a, c_-^dagger, c_+).
enum class Mode : int { Probe = 0, Minus = 1, Plus = 2 };

inline constexpr std::array<Mode, 3> kModes = {Mode::Probe, Mode::Minus, Mode::Plus};

inline constexpr int idx(Mode m) { return static_cast<int>(m); }
const char* mode_name(Mode m);

enum class Regime { Stable, Unstable, Marginal };

const char* regime_name(Regime r);

/// Imaginary-part threshold above which a conjugate pair counts as growing.
inline constexpr double kUnstableImagTol = 1e-8;
/// Relative threshold below which all roots count as real.
inline constexpr double kStableImagTol = 1e-12;
/// Smallest eigenvalue gap accepted as non-degenerate. Roots near a double
/// root carry ~sqrt(machine eps) noise, so the gap test sits above 1.5e-8.
inline constexpr double kDegenerateGapTol = 1e-7;

class DegenerateSpectrumError : public std::runtime_error {
 public:
  explicit DegenerateSpectrumError(const std::string& what) : std::runtime_error(what) {}
};

/// Real coupling matrix M of d/dtau d = i M d.
Eigen::Matrix3d coupling_matrix(const ModelParams& model);

/// Coefficients (c2, c1, c0) of the monic characteristic cubic
/// lambda^3 + c2 lambda^2 + c1 lambda + c0 of the coupling matrix.
std::array<double, 3> characteristic_coefficients(const ModelParams& model);

cplx characteristic_polynomial(const ModelParams& model, cplx lambda);

/// Three roots of the characteristic cubic: one Newton-polished real root
/// from the companion matrix, the other two from the deflated quadratic.
/// Complex roots come back as an exact conjugate pair, real roots with zero
/// imaginary part.
Roots characteristic_roots(const ModelParams& model);

/// STABLE: all roots real and pairwise separated by kDegenerateGapTol.
/// UNSTABLE: a conjugate pair with |Im| > kUnstableImagTol, all roots
/// separated. MARGINAL: anything else (threshold, degenerate spectrum).
Regime classify_regime(const Roots& roots);

struct SpectralData {
  ModelParams model;
  /// Ordered so that eigenvalues[2] is the growing branch (most negative
  /// imaginary part, since the time dependence is exp(i lambda tau)).
  Roots eigenvalues;
  Mat3 eigenvectors;  // columns v_j
  Mat3 inverse;       // V^-1
  double gain_rate = 0.0;    // Gamma = -Im lambda_3 (0 when stable)
  double oscillation = 0.0;  // Omega = Re lambda_3
  Mat3 asymptotic_weights;   // zeta_ij = v_i3 (V^-1)_3j
  double fluctuation_f = 0.0;  // |(V^-1)_{3,-} / (V^-1)_{3,a}|, +inf if the denominator vanishes
  Regime regime = Regime::Stable;

  cplx zeta(Mode i, Mode j) const { return asymptotic_weights(idx(i), idx(j)); }
};

/// Full eigendecomposition of the coupling matrix.
///
/// Eigenvectors have unit Euclidean norm with their first nonzero
/// component real and positive. Throws DegenerateSpectrumError at MARGINAL
/// points or whenever two eigenvalues are closer than kDegenerateGapTol;
/// propagate_series handles those points.
SpectralData eigensystem(const ModelParams& model);

}  // namespace carl

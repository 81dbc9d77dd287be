#pragma once

#include <stdexcept>
#include <string>

#include "carl/spectral.hpp"

namespace carl {

class RegimeError : public std::runtime_error {
 public:
  explicit RegimeError(const std::string& what) : std::runtime_error(what) {}
};

/// Coefficients u_ij(tau) of d_i(tau) = sum_j u_ij(tau) d_j(0), with
/// d = (a, c_-^dagger, c_+).
struct PropagatorMatrix {
  double tau = 0.0;
  Mat3 entries = Mat3::Identity();

  cplx operator()(Mode i, Mode j) const { return entries(idx(i), idx(j)); }

  /// Bosonic metric diag(+1, -1, +1) of the mixed annihilation/creation basis.
  static Eigen::Vector3d metric() { return Eigen::Vector3d(1.0, -1.0, 1.0); }
};

/// V diag(exp(i lambda_k tau)) V^-1.
PropagatorMatrix propagate_exact(const SpectralData& spectral, double tau);

/// exp(i M tau) by Taylor scaling-and-squaring; valid at degenerate points.
PropagatorMatrix propagate_series(const ModelParams& model, double tau);

/// propagate_exact when the spectrum is non-degenerate, propagate_series
/// otherwise.
PropagatorMatrix propagate_auto(const ModelParams& model, double tau);

/// zeta_ij exp((Gamma + i Omega) tau). Throws RegimeError unless UNSTABLE.
PropagatorMatrix propagate_asymptotic(const SpectralData& spectral, double tau);

/// Residuals of U eta U^dagger = eta and det U = exp(i delta tau).
///
/// `absolute` is the raw max entry; `scaled` divides each entry by the size
/// of the products that cancel in it (row norms for the metric check, the
/// Hadamard bound for the determinant), which is the quantity double
/// precision can hold to a fixed tolerance however large U grows.
struct StructureResidual {
  double absolute = 0.0;
  double scaled = 0.0;
};

StructureResidual pseudo_unitarity_residual(const PropagatorMatrix& u);
StructureResidual determinant_residual(const PropagatorMatrix& u, double delta);

/// max_ij |A_ij - B_ij| / max(1, max_ij |B_ij|)
double relative_max_deviation(const Mat3& a, const Mat3& b);

}  // namespace carl

#include "carl/propagator.hpp"

#include <algorithm>
#include <cmath>

namespace carl {

namespace {

void require_tau(double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be finite and >= 0");
}

}  // namespace

PropagatorMatrix propagate_exact(const SpectralData& spectral, double tau) {
  require_tau(tau);
  if (spectral.regime == Regime::Marginal) {
    throw DegenerateSpectrumError("propagate_exact refuses a MARGINAL spectrum; use propagate_series");
  }
  PropagatorMatrix u;
  u.tau = tau;
  if (tau == 0.0) return u;
  Vec3 phases;
  for (int k = 0; k < 3; ++k) phases(k) = std::exp(cplx(0.0, 1.0) * spectral.eigenvalues[k] * tau);

  u.entries = spectral.eigenvectors * phases.asDiagonal() * spectral.inverse;
  return u;
}

PropagatorMatrix propagate_series(const ModelParams& model, double tau) {
  require_tau(tau);
  model.validate();
  Mat3 a = cplx(0.0, tau) * coupling_matrix(model).cast<cplx>();

  // scale until ||A|| <= 1/2, where 20 Taylor terms reach double precision
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  a /= std::ldexp(1.0, squarings);

  Mat3 sum = Mat3::Identity();
  Mat3 term = Mat3::Identity();
  for (int n = 1; n <= 20; ++n) {
    term = term * a / static_cast<double>(n);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;

  PropagatorMatrix u;
  u.tau = tau;
  u.entries = sum;
  return u;
}

PropagatorMatrix propagate_auto(const ModelParams& model, double tau) {
  try {
    return propagate_exact(eigensystem(model), tau);
  } catch (const DegenerateSpectrumError&) {
    return propagate_series(model, tau);
  }
}

PropagatorMatrix propagate_asymptotic(const SpectralData& spectral, double tau) {
  require_tau(tau);
  if (spectral.regime != Regime::Unstable) {
    throw RegimeError(std::string("no exponential growth regime in a ") + regime_name(spectral.regime) +
                      " spectrum");
  }
  PropagatorMatrix u;
  u.tau = tau;
  u.entries = spectral.asymptotic_weights *
              std::exp(cplx(spectral.gain_rate, spectral.oscillation) * tau);
  return u;
}

StructureResidual pseudo_unitarity_residual(const PropagatorMatrix& u) {
  const Eigen::Vector3d eta = PropagatorMatrix::metric();
  const Mat3 product = u.entries * eta.cast<cplx>().asDiagonal() * u.entries.adjoint();
  const Mat3 diff = product - Mat3(eta.cast<cplx>().asDiagonal());
  const Eigen::Vector3d row_norms = u.entries.rowwise().norm();

  StructureResidual r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double e = std::abs(diff(i, j));
      r.absolute = std::max(r.absolute, e);
      r.scaled = std::max(r.scaled, e / std::max(1.0, row_norms(i) * row_norms(j)));
    }
  }
  return r;
}

StructureResidual determinant_residual(const PropagatorMatrix& u, double delta) {
  const cplx expected = std::exp(cplx(0.0, delta * u.tau));
  const double e = std::abs(u.entries.determinant() - expected);
  const double hadamard = u.entries.rowwise().norm().prod();
  return {e, e / std::max(1.0, hadamard)};
}

double relative_max_deviation(const Mat3& a, const Mat3& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace carl

#include "carl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace carl {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Probe: return "a";
    case Mode::Minus: return "minus";
    case Mode::Plus: return "plus";
  }
  return "?";
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Stable: return "STABLE";
    case Regime::Unstable: return "UNSTABLE";
    case Regime::Marginal: return "MARGINAL";
  }
  return "?";
}

Eigen::Matrix3d coupling_matrix(const ModelParams& model) {
  const double x = model.chi;
  Eigen::Matrix3d m;
  m << model.delta, -x, -x,
       x, 1.0, 0.0,
       -x, 0.0, -1.0;
  return m;
}

std::array<double, 3> characteristic_coefficients(const ModelParams& model) {
  // det(M - lambda) = (delta - lambda)(lambda^2 - 1) - 2 chi^2
  return {-model.delta, -1.0, model.delta + 2.0 * model.chi * model.chi};
}

cplx characteristic_polynomial(const ModelParams& model, cplx lambda) {
  const auto c = characteristic_coefficients(model);
  return ((lambda + c[0]) * lambda + c[1]) * lambda + c[2];
}

namespace {

cplx characteristic_derivative(const std::array<double, 3>& c, cplx lambda) {
  return (3.0 * lambda + 2.0 * c[0]) * lambda + c[1];
}

cplx newton_polish(const ModelParams& model, cplx root) {
  const auto c = characteristic_coefficients(model);
  const cplx p = characteristic_polynomial(model, root);
  const cplx dp = characteristic_derivative(c, root);
  if (dp == cplx(0.0)) return root;
  const cplx candidate = root - p / dp;
  // near a double root Newton can overshoot; keep the step only if it helps
  if (std::abs(characteristic_polynomial(model, candidate)) < std::abs(p)) return candidate;
  return root;
}

}  // namespace

Roots characteristic_roots(const ModelParams& model) {
  model.validate();
  const auto c = characteristic_coefficients(model);
  Eigen::Matrix3d companion;
  companion << -c[0], -c[1], -c[2],
               1.0, 0.0, 0.0,
               0.0, 1.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix3d> solver(companion, false);
  const Eigen::Vector3cd ev = solver.eigenvalues();

  // Keep one real root (the most isolated when all are real), deflate, and
  // solve the quadratic exactly so a double root cannot pick up a spurious
  // imaginary part.
  int real_index = -1;
  double best_isolation = -1.0;
  for (int i = 0; i < 3; ++i) {
    if (ev(i).imag() != 0.0) continue;
    double isolation = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 3; ++j) {
      if (j != i) isolation = std::min(isolation, std::abs(ev(i) - ev(j)));
    }
    if (isolation > best_isolation) best_isolation = isolation, real_index = i;
  }
  const double r = newton_polish(model, cplx(ev(real_index).real(), 0.0)).real();

  // lambda^3 + c2 lambda^2 + c1 lambda + c0 = (lambda - r)(lambda^2 + p lambda + q)
  const double p = c[0] + r;
  const double q = c[1] + r * p;
  const double disc = p * p - 4.0 * q;
  Roots roots{};
  roots[0] = cplx(r, 0.0);
  if (disc >= 0.0) {
    const double big = -0.5 * (p + std::copysign(std::sqrt(disc), p));
    const double small = big != 0.0 ? q / big : 0.0;
    roots[1] = cplx(newton_polish(model, cplx(big, 0.0)).real(), 0.0);
    roots[2] = cplx(newton_polish(model, cplx(small, 0.0)).real(), 0.0);
  } else {
    const cplx upper = newton_polish(model, cplx(-0.5 * p, 0.5 * std::sqrt(-disc)));
    roots[1] = upper;
    roots[2] = std::conj(upper);
  }
  return roots;
}

Regime classify_regime(const Roots& roots) {
  double scale = 1.0;
  double max_imag = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    scale = std::max(scale, std::abs(roots[i]));
    max_imag = std::max(max_imag, std::abs(roots[i].imag()));
    for (int j = i + 1; j < 3; ++j) min_gap = std::min(min_gap, std::abs(roots[i] - roots[j]));
  }
  if (min_gap < kDegenerateGapTol) return Regime::Marginal;
  if (max_imag <= kStableImagTol * scale) return Regime::Stable;

  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const bool conjugate = std::abs(roots[i] - std::conj(roots[j])) <= 1e-9 * scale;
      if (conjugate && std::abs(roots[i].imag()) > kUnstableImagTol) return Regime::Unstable;
    }
  }
  return Regime::Marginal;
}

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return Vec3(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

// Null vector of (M - lambda) from the best-conditioned pair of rows.
Vec3 null_vector(const Eigen::Matrix3d& m, cplx lambda) {
  Mat3 a = m.cast<cplx>();
  a.diagonal().array() -= lambda;
  const std::array<Vec3, 3> candidates = {
      cross(a.row(0).transpose(), a.row(1).transpose()),
      cross(a.row(0).transpose(), a.row(2).transpose()),
      cross(a.row(1).transpose(), a.row(2).transpose()),
  };
  const auto best = std::max_element(candidates.begin(), candidates.end(),
                                     [](const Vec3& x, const Vec3& y) { return x.norm() < y.norm(); });
  Vec3 v = *best / best->norm();

  for (int i = 0; i < 3; ++i) {
    if (std::abs(v(i)) > 1e-12) {
      v *= std::conj(v(i)) / std::abs(v(i));
      v(i) = cplx(v(i).real(), 0.0);
      break;
    }
  }
  return v;
}

}  // namespace

SpectralData eigensystem(const ModelParams& model) {
  model.validate();
  Roots roots = characteristic_roots(model);
  const Regime regime = classify_regime(roots);
  if (regime == Regime::Marginal) {
    throw DegenerateSpectrumError("spectrum is MARGINAL (degenerate or at threshold); use propagate_series");
  }

  if (regime == Regime::Stable) {
    for (auto& r : roots) r = cplx(r.real(), 0.0);
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  } else {
    // (real, upper, lower): the lower-half-plane root grows
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
      return std::abs(a.imag()) < std::abs(b.imag()) ||
             (std::abs(a.imag()) == std::abs(b.imag()) && a.imag() > b.imag());
    });
  }

  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(roots[i] - roots[j]) < kDegenerateGapTol) {
        throw DegenerateSpectrumError("eigenvalue gap below tolerance; use propagate_series");
      }
    }
  }

  const Eigen::Matrix3d m = coupling_matrix(model);
  SpectralData s;
  s.model = model;
  s.eigenvalues = roots;
  s.regime = regime;
  for (int j = 0; j < 3; ++j) s.eigenvectors.col(j) = null_vector(m, roots[j]);
  s.inverse = s.eigenvectors.inverse();

  const cplx grow = roots[2];
  s.gain_rate = regime == Regime::Unstable ? -grow.imag() : 0.0;
  s.oscillation = grow.real();
  s.asymptotic_weights = s.eigenvectors.col(2) * s.inverse.row(2);

  const double w_a = std::abs(s.inverse(2, idx(Mode::Probe)));
  const double w_m = std::abs(s.inverse(2, idx(Mode::Minus)));
  s.fluctuation_f = w_a > 0.0 ? w_m / w_a : std::numeric_limits<double>::infinity();
  return s;
}

}  // namespace carl

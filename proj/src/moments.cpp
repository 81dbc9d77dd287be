#include "carl/moments.hpp"

#include <cmath>
#include <sstream>

namespace carl {

LinearOperator LinearOperator::adjoint() const {
  LinearOperator out;
  out.mean = std::conj(mean);
  for (int k = 0; k < 6; ++k) out.coeff[k ^ 1] = std::conj(coeff[k]);
  return out;
}

LinearOperator LinearOperator::operator+(const LinearOperator& other) const {
  LinearOperator out = *this;
  out.mean += other.mean;
  for (int k = 0; k < 6; ++k) out.coeff[k] += other.coeff[k];
  return out;
}

LinearOperator LinearOperator::operator*(cplx s) const {
  LinearOperator out = *this;
  out.mean *= s;
  for (auto& c : out.coeff) c *= s;
  return out;
}

WickEngine::WickEngine(const PropagatorMatrix& u, cplx alpha) : u_(u), alpha_(alpha) {
  const Mat3& m = u.entries;
  // d_i(tau) = u_ia (alpha + da) + u_i- dc_-^dag + u_i+ dc_+ for i = a, +
  for (Mode mode : {Mode::Probe, Mode::Plus}) {
    const int i = idx(mode);
    LinearOperator& b = annihilators_[i];
    b.mean = alpha * m(i, 0);
    b.coeff[0] = m(i, 0);
    b.coeff[3] = m(i, 1);
    b.coeff[4] = m(i, 2);
  }
  // c_-(tau) is the adjoint of d_-(tau)
  LinearOperator d_minus;
  d_minus.mean = alpha * m(1, 0);
  d_minus.coeff[0] = m(1, 0);
  d_minus.coeff[3] = m(1, 1);
  d_minus.coeff[4] = m(1, 2);
  annihilators_[idx(Mode::Minus)] = d_minus.adjoint();
}

cplx WickEngine::contraction(const LinearOperator& x, const LinearOperator& y) {
  return x.coeff[0] * y.coeff[1] + x.coeff[2] * y.coeff[3] + x.coeff[4] * y.coeff[5];
}

cplx WickEngine::expect(const LinearOperator& x, const LinearOperator& y) const {
  return x.mean * y.mean + contraction(x, y);
}

cplx WickEngine::expect(const LinearOperator& w, const LinearOperator& x, const LinearOperator& y,
                        const LinearOperator& z) const {
  const cplx wx = contraction(w, x), wy = contraction(w, y), wz = contraction(w, z);
  const cplx xy = contraction(x, y), xz = contraction(x, z), yz = contraction(y, z);
  return w.mean * x.mean * y.mean * z.mean
       + y.mean * z.mean * wx + x.mean * z.mean * wy + x.mean * y.mean * wz
       + w.mean * z.mean * xy + w.mean * y.mean * xz + w.mean * x.mean * yz
       + wx * yz + wy * xz + wz * xy;
}

MeanFields mean_fields(const PropagatorMatrix& u, cplx alpha) {
  return {alpha * u(Mode::Probe, Mode::Probe), std::conj(alpha * u(Mode::Minus, Mode::Probe)),
          alpha * u(Mode::Plus, Mode::Probe)};
}

Intensities intensities(const PropagatorMatrix& u, cplx alpha) {
  const double a2 = std::norm(alpha);
  auto eval = [&](Mode i) {
    return a2 * std::norm(u(i, Mode::Probe)) + std::norm(u(i, Mode::Minus)) - (i == Mode::Minus ? 1.0 : 0.0);
  };
  return {eval(Mode::Probe), eval(Mode::Minus), eval(Mode::Plus)};
}

Intensities intensities_wick(const PropagatorMatrix& u, cplx alpha) {
  const WickEngine w(u, alpha);
  auto eval = [&](Mode i) { return w.expect(w.creator(i), w.annihilator(i)).real(); };
  return {eval(Mode::Probe), eval(Mode::Minus), eval(Mode::Plus)};
}

namespace {

double number(const WickEngine& w, Mode i) { return w.expect(w.creator(i), w.annihilator(i)).real(); }

Maybe g2_single(const WickEngine& w, Mode i) {
  const double n = number(w, i);
  if (n < kIntensityFloor) return std::nullopt;
  const LinearOperator bd = w.creator(i);
  const LinearOperator& b = w.annihilator(i);
  return w.expect(bd, bd, b, b).real() / (n * n);
}

CrossCorrelation g2_cross(const WickEngine& w, Mode i, Mode j, Maybe g2_i, Maybe g2_j) {
  const double ni = number(w, i);
  const double nj = number(w, j);
  Maybe g2_ij;
  if (ni >= kIntensityFloor && nj >= kIntensityFloor) {
    g2_ij = w.expect(w.creator(i), w.annihilator(i), w.creator(j), w.annihilator(j)).real() / (ni * nj);
  }
  return correlation_bounds(g2_ij, g2_i, g2_j, ni, nj);
}

Uncertainty uncertainty(const WickEngine& w, Mode i) {
  const LinearOperator& b = w.annihilator(i);
  const LinearOperator bd = b.adjoint();
  const double ell = std::abs(b.mean);
  if (ell < kIntensityFloor) return {};
  const double phi = std::arg(b.mean);

  auto quadrature_variance = [&](double theta) {
    const cplx rot = std::exp(cplx(0.0, -2.0 * theta));
    const cplx v = rot * WickEngine::contraction(b, b) + WickEngine::contraction(b, bd) +
                   WickEngine::contraction(bd, b) + std::conj(rot) * WickEngine::contraction(bd, bd);
    return 0.25 * v.real();
  };
  const double parallel = std::sqrt(quadrature_variance(phi));
  const double perpendicular = std::sqrt(quadrature_variance(phi + 0.5 * M_PI));
  return {parallel / ell, perpendicular / ell};
}

}  // namespace

Maybe g2_single(const PropagatorMatrix& u, cplx alpha, Mode i) {
  return g2_single(WickEngine(u, alpha), i);
}

CrossCorrelation g2_cross(const PropagatorMatrix& u, cplx alpha, Mode i, Mode j) {
  if (i == j) throw std::invalid_argument("g2_cross needs two distinct modes");
  const WickEngine w(u, alpha);
  return g2_cross(w, i, j, g2_single(w, i), g2_single(w, j));
}

Uncertainty phase_amplitude_uncertainty(const PropagatorMatrix& u, cplx alpha, Mode i) {
  if (alpha == cplx(0.0)) {
    throw std::invalid_argument("phase uncertainty needs an injected probe (alpha != 0)");
  }
  return uncertainty(WickEngine(u, alpha), i);
}

Bunching bunching(const PropagatorMatrix& u, cplx alpha, double atom_count) {
  if (!(atom_count > 0.0)) throw std::invalid_argument("atom_count must be > 0");
  const WickEngine w(u, alpha);
  const LinearOperator b =
      (w.creator(Mode::Minus) + w.annihilator(Mode::Plus)) * cplx(1.0 / std::sqrt(atom_count));
  return {b.mean, w.expect(b.adjoint(), b).real()};
}

CrossCorrelation correlation_bounds(Maybe g2_ij, Maybe g2_i, Maybe g2_j, double intensity_i,
                                    double intensity_j) {
  CrossCorrelation c;
  c.g2 = g2_ij;
  if (!g2_i || !g2_j || intensity_i < kIntensityFloor || intensity_j < kIntensityFloor) return c;
  c.cs_bound = std::sqrt(*g2_i * *g2_j);
  c.quantum_bound = std::sqrt((*g2_i + 1.0 / intensity_i) * (*g2_j + 1.0 / intensity_j));
  // a relative margin keeps rounding at equality (g2_a+ = 2 when alpha = 0) from flagging
  c.violates_cs = g2_ij && *g2_ij > *c.cs_bound * (1.0 + 1e-13);
  return c;
}

std::array<Mode, 2> pair_modes(Pair p) {
  switch (p) {
    case Pair::AMinus: return {Mode::Probe, Mode::Minus};
    case Pair::APlus: return {Mode::Probe, Mode::Plus};
    case Pair::MinusPlus: return {Mode::Minus, Mode::Plus};
  }
  return {Mode::Probe, Mode::Minus};
}

const char* pair_name(Pair p) {
  switch (p) {
    case Pair::AMinus: return "aminus";
    case Pair::APlus: return "aplus";
    case Pair::MinusPlus: return "minusplus";
  }
  return "?";
}

std::string check_record_invariants(const ObservablesRecord& rec, cplx alpha) {
  std::ostringstream err;
  const auto& in = rec.intensity;
  const double charge = in.probe - in.minus + in.plus;
  if (std::abs(charge - std::norm(alpha)) > 1e-8 * std::max(1.0, in.probe)) {
    err << "conserved charge drifted: I_a - I_- + I_+ = " << charge << " vs |alpha|^2 = " << std::norm(alpha)
        << "; ";
  }
  const double scale = std::max({1.0, in.probe, in.minus, in.plus});
  for (Mode m : kModes) {
    if (in[m] < -1e-12 * scale) err << "negative intensity in mode " << mode_name(m) << "; ";
    if (rec.g2[idx(m)] && *rec.g2[idx(m)] < 0.0) err << "negative g2 in mode " << mode_name(m) << "; ";
  }
  for (Pair p : kPairs) {
    const auto& c = rec.pair(p);
    if (c.g2 && *c.g2 < 0.0) err << "negative cross g2 " << pair_name(p) << "; ";
    if (c.g2 && c.quantum_bound && *c.quantum_bound - *c.g2 < -1e-8 * std::max(1.0, *c.quantum_bound)) {
      err << "quantum bound exceeded for " << pair_name(p) << "; ";
    }
  }
  return err.str();
}

ObservablesRecord observables(const PropagatorMatrix& u, cplx alpha, double atom_count, bool check_invariants) {
  const WickEngine w(u, alpha);
  ObservablesRecord rec;
  rec.tau = u.tau;
  rec.means = mean_fields(u, alpha);
  rec.intensity = intensities(u, alpha);

  const Intensities wick = intensities_wick(u, alpha);
  for (Mode m : kModes) {
    if (check_invariants && std::abs(wick[m] - rec.intensity[m]) > 1e-12 * std::max(1.0, std::abs(rec.intensity[m]))) {
      throw InvariantViolation(std::string("closed-form and Wick intensities disagree in mode ") +
                               mode_name(m));
    }
  }

  for (Mode m : kModes) rec.g2[idx(m)] = g2_single(w, m);
  for (Pair p : kPairs) {
    const auto [i, j] = pair_modes(p);
    rec.cross[static_cast<int>(p)] = g2_cross(w, i, j, rec.g2[idx(i)], rec.g2[idx(j)]);
  }
  if (alpha != cplx(0.0)) {
    for (Mode m : kModes) rec.uncertainty[idx(m)] = uncertainty(w, m);
  }
  rec.bunch = bunching(u, alpha, atom_count);
  rec.depletion_fraction = (rec.intensity.minus + rec.intensity.plus) / atom_count;

  if (!check_invariants) return rec;
  if (const std::string err = check_record_invariants(rec, alpha); !err.empty()) {
    throw InvariantViolation(err);
  }
  return rec;
}

ObservablesRecord record(const ModelParams& model, const SpectralData& spectral, double tau, double atom_count) {
  return observables(propagate_exact(spectral, tau), model.alpha, atom_count);
}

}  // namespace carl

#pragma once

#include <complex>

namespace carl {

using cplx = std::complex<double>;

namespace constants {
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double speed_of_light = 299792458.0; // m / s
inline constexpr double epsilon0 = 8.8541878128e-12;  // F / m
}  // namespace constants

/// Laboratory parameters of the pump/probe/condensate setup (SI units).
///
/// The pump and the probe counterpropagate, so the recoil momentum has
/// magnitude k0 + k.
struct PhysicalParams {
  double dipole_moment;         // C m
  double cavity_length;         // m
  double mode_cross_section;    // m^2
  double detuning_Delta;        // rad/s, pump detuning from the atomic line
  cplx pump_rabi_Omega0;        // rad/s
  double pump_frequency_omega0; // rad/s
  double probe_wavenumber_k;    // 1/m
  double pump_wavenumber_k0;    // 1/m
  double atom_count_N;
  double atom_mass;             // kg

  /// Throws std::invalid_argument if a positivity constraint is violated,
  /// Delta vanishes, or the recoil momentum is zero.
  void validate() const;

  double recoil_wavenumber() const { return pump_wavenumber_k0 + probe_wavenumber_k; }
};

/// Dimensionless control point of the three-mode model.
///
/// chi is the (real, non-negative) effective coupling, delta the pump-probe
/// detuning in recoil units and alpha the coherent amplitude injected into
/// the probe at tau = 0. alpha == 0 is the spontaneous case.
struct ModelParams {
  double chi = 0.0;
  double delta = 0.0;
  cplx alpha = 0.0;

  /// Throws std::invalid_argument for chi < 0 or non-finite entries.
  void validate() const;
  bool spontaneous() const { return alpha == cplx(0.0); }
};

struct DerivedModel {
  ModelParams model;        // alpha left at zero
  double recoil_frequency;  // omega_r = hbar K^2 / 2m, rad/s
  double coupling_g;        // |g|, rad/s
};

/// chi = |g| |Omega0| sqrt(N) / (8 omega_r |Delta|).
double effective_coupling(double coupling_g, double pump_rabi, double atom_count,
                          double recoil_frequency, double detuning_Delta);

/// Maps laboratory quantities onto (chi, delta).
DerivedModel derive_model(const PhysicalParams& phys);

/// Largest probe occupation compatible with neglecting cross-phase
/// modulation, |Omega0|^2 / (4 |g|^2).
double probe_occupation_cap(const PhysicalParams& phys);

}  // namespace carl

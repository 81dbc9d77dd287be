#include "carl/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace carl {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be finite and > 0");
  }
}

}  // namespace

void PhysicalParams::validate() const {
  require_positive(dipole_moment, "dipole_moment");
  require_positive(cavity_length, "cavity_length");
  require_positive(mode_cross_section, "mode_cross_section");
  require_positive(pump_frequency_omega0, "pump_frequency_omega0");
  require_positive(probe_wavenumber_k, "probe_wavenumber_k");
  require_positive(pump_wavenumber_k0, "pump_wavenumber_k0");
  require_positive(atom_count_N, "atom_count_N");
  require_positive(atom_mass, "atom_mass");
  if (detuning_Delta == 0.0 || !std::isfinite(detuning_Delta)) {
    throw std::invalid_argument("detuning_Delta must be nonzero: adiabatic elimination needs a detuned pump");
  }
  if (!std::isfinite(pump_rabi_Omega0.real()) || !std::isfinite(pump_rabi_Omega0.imag())) {
    throw std::invalid_argument("pump_rabi_Omega0 must be finite");
  }
  if (!(recoil_wavenumber() > 0.0)) {
    throw std::invalid_argument("recoil momentum vanishes; recoil frequency undefined");
  }
}

void ModelParams::validate() const {
  if (!(chi >= 0.0) || !std::isfinite(chi)) {
    throw std::invalid_argument("chi must be finite and >= 0");
  }
  if (!std::isfinite(delta)) throw std::invalid_argument("delta must be finite");
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
    throw std::invalid_argument("alpha must be finite");
  }
}

double effective_coupling(double coupling_g, double pump_rabi, double atom_count,
                          double recoil_frequency, double detuning_Delta) {
  if (detuning_Delta == 0.0) throw std::invalid_argument("detuning_Delta must be nonzero");
  if (!(recoil_frequency > 0.0)) throw std::invalid_argument("recoil_frequency must be > 0");
  if (!(atom_count > 0.0)) throw std::invalid_argument("atom_count must be > 0");
  return std::abs(coupling_g) * std::abs(pump_rabi) * std::sqrt(atom_count) /
         (8.0 * recoil_frequency * std::abs(detuning_Delta));
}

DerivedModel derive_model(const PhysicalParams& phys) {
  phys.validate();
  using namespace constants;

  const double K = phys.recoil_wavenumber();
  const double omega_r = hbar * K * K / (2.0 * phys.atom_mass);
  const double omega_probe = speed_of_light * phys.probe_wavenumber_k;
  // single-photon field amplitude over hbar, in rad/s
  const double g = phys.dipole_moment *
                   std::sqrt(omega_probe / (2.0 * hbar * epsilon0 * phys.cavity_length *
                                            phys.mode_cross_section));

  DerivedModel out;
  out.recoil_frequency = omega_r;
  out.coupling_g = g;
  out.model.chi = effective_coupling(g, std::abs(phys.pump_rabi_Omega0), phys.atom_count_N, omega_r,
                                     phys.detuning_Delta);
  out.model.delta = (phys.pump_frequency_omega0 - omega_probe) / omega_r;
  return out;
}

double probe_occupation_cap(const PhysicalParams& phys) {
  const DerivedModel d = derive_model(phys);
  const double rabi = std::abs(phys.pump_rabi_Omega0);
  return rabi * rabi / (4.0 * d.coupling_g * d.coupling_g);
}

}  // namespace carl

#include "carl/validity.hpp"

#include <cmath>
#include <stdexcept>

namespace carl {

double validity_horizon(const SpectralData& spectral, const ModelParams& model, double atom_count,
                        double probe_cap, double fraction_eps, const TauGrid& grid) {
  if (!(fraction_eps > 0.0 && fraction_eps <= 1.0)) throw std::invalid_argument("fraction_eps must lie in (0, 1]");
  if (!(atom_count > 0.0)) throw std::invalid_argument("atom_count must be > 0");
  if (!(grid.step > 0.0) || !(grid.end >= 0.0)) throw std::invalid_argument("invalid tau grid");

  const auto points = static_cast<long>(std::floor(grid.end / grid.step + 1e-9));
  double last_valid = -1.0;
  for (long n = 0; n <= points; ++n) {
    const double tau = static_cast<double>(n) * grid.step;
    const Intensities in = intensities(propagate_exact(spectral, tau), model.alpha);
    const bool ok = (in.minus + in.plus) / atom_count <= fraction_eps && in.probe <= probe_cap;
    if (!ok) {
      if (last_valid < 0.0) return 0.0;
      return last_valid;
    }
    last_valid = tau;
  }
  return kNeverExceeded;
}

}  // namespace carl

#pragma once

#include <limits>

#include "carl/moments.hpp"

namespace carl {

/// Uniform search grid tau = 0, step, 2 step, ... up to `end`.
struct TauGrid {
  double step = 1e-3;
  double end = 50.0;
};

inline constexpr double kNeverExceeded = std::numeric_limits<double>::infinity();

/// Last grid time before the linearization stops being trustworthy: the
/// side-mode population must stay below fraction_eps * N and the probe
/// occupation below probe_cap. Returns kNeverExceeded when no grid point
/// violates either constraint.
double validity_horizon(const SpectralData& spectral, const ModelParams& model, double atom_count,
                        double probe_cap, double fraction_eps, const TauGrid& grid = {});

}  // namespace carl

#pragma once

// Shared argument guards for the estimation modules.  Internal to the
// library; not installed.

#include <cmath>

#include "deridge/errors.hpp"
#include "deridge/spectral.hpp"

namespace deridge {

inline void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw usage_error("lambda must be a positive finite number");
}

inline void check_rank(const SpectralCache& cache) {
  if (cache.rank == 0)
    throw model_error("design has rank zero; nothing is estimable");
}

inline void check_level(double level) {
  if (!(level > 0.0) || !(level < 1.0))
    throw usage_error("level must lie strictly inside (0, 1)");
}

}  // namespace deridge

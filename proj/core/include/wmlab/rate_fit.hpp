#pragma once

#include <span>

#include "wmlab/modulation.hpp"

namespace wmlab {

/// s = √(λ|log λ|) ≈ a (T₊ − t), C = a². Linear least squares in (a, aT₊).
struct RateFit {
  double T_plus = 0.0;
  double C = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

RateFit fit_blowup_rate(std::span<const double> t, std::span<const double> lambda);

/// Uses the converged rows with t in [t_lo, t_hi].
RateFit fit_blowup_rate(const ModulationTrack& track, double t_lo, double t_hi);

}  // namespace wmlab

#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wmlab/field.hpp"

namespace wmlab {

class ModulationTrack;

struct SolverConfig {
  double cfl = 0.5;
  double t_end = 1.0;
  double output_dt = 0.1;
  double refine_trigger = 64.0;  // refine when λ estimate < K·h_min
  int max_levels = 12;
  double blowup_floor = 1e-7;
  double gradient_cap = 1e9;
  double boundary_tol = 1e-3;
  bool adaptive = true;

  void validate() const;
};

struct StepReport {
  double t = 0.0;
  double dt = 0.0;
  double energy = 0.0;
  double relative_energy_drift = 0.0;
  double h_min = 0.0;
  double lambda_estimate = std::numeric_limits<double>::infinity();
  bool regridded = false;
  bool blowup_suspected = false;
};

/// (2ψ − sin 2ψ)/(2ψ³), Taylor-expanded near 0.
double nonlinearity_Z(double psi);

/// u_tt for the 4d radial equation u_tt = u_rr + (3/r)u_r + Z(ru)u³.
/// The last node is held fixed (zero acceleration).
std::vector<double> rhs(std::span<const double> u, const RadialGrid& grid);

/// One classical RK4 step. Throws if dt exceeds cfl·h_min.
WaveMapState step(const WaveMapState& s, double dt, double cfl = 0.9);

/// Radius where |ψ| first reaches π/2 (interpolated); +inf if never.
double lambda_estimate(const WaveMapState& s);

struct RegridResult {
  WaveMapState state;
  bool refined = false;
  bool exhausted = false;  // max_levels reached
};

/// Adds one dyadic patch near the origin when the refine trigger fires.
RegridResult regrid(const WaveMapState& s, const SolverConfig& cfg);

/// Grid one level finer on [0, r_hi/2] of the current finest patch.
GridPtr refined_grid(const RadialGrid& g);

using Observer = std::function<void(const WaveMapState&, const StepReport&)>;

struct Trajectory {
  std::vector<StepReport> reports;  // output cadence plus regrid events
  double initial_energy = 0.0;
  double final_time = 0.0;
  std::size_t steps = 0;
  int regrids = 0;
  bool halted = false;
  std::string halt_reason;       // "blowup_floor", "gradient_cap", "max_levels", "nan"
  std::string boundary_warning;  // set when the light cone may reach r_max
  double max_abs_drift = 0.0;
};

/// RK4 evolution with output-cadence observers. The state's tail
/// descriptor is carried along unchanged.
Trajectory evolve(const WaveMapState& s0, const SolverConfig& cfg,
                  const std::vector<Observer>& observers = {}, WaveMapState* final_state = nullptr);

struct BlowupEvidence {
  bool declared = false;
  std::string reason;
  double t_trigger = 0.0;
  double lambda_at_trigger = 0.0;
  double T_plus = std::numeric_limits<double>::quiet_NaN();
  double C = std::numeric_limits<double>::quiet_NaN();
  bool rate_fitted = false;
};

/// Declares blow-up from the trajectory flags; fits the rate on the
/// converged, λ-decreasing tail of `track` when one is supplied.
BlowupEvidence detect_blowup(const Trajectory& traj, const ModulationTrack* track = nullptr);

}  // namespace wmlab

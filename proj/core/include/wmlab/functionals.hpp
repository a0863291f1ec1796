#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wmlab/field.hpp"
#include "wmlab/harmonic.hpp"

namespace wmlab {

/// Smooth cutoff: 1 on [0, 1], 0 on [2, ∞), quintic smoothstep between.
double chi(double x);
double chi_prime(double x);

struct EnergyReport {
  double total = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  std::vector<std::pair<double, double>> exterior;  // (R, energy on [R, r_max])
  double tail = 0.0;                 // analytic contribution beyond r_max
  double truncation_estimate = 0.0;  // set when no tail descriptor is attached
};

/// π ∫ (ψ_t² + ψ_r² + sin²ψ/r²) r dr.
EnergyReport energy(const WaveMapState& s, const std::vector<double>& exterior_radii = {});

/// Energy density e(r) = ψ_t² + ψ_r² + sin²ψ/r² (without the π, times r).
std::vector<double> energy_density_r(const WaveMapState& s);

struct BogomolnyiReport {
  double residual = 0.0;
  double reconstructed_total = 0.0;
  double energy = 0.0;
};

BogomolnyiReport bogomolnyi(const WaveMapState& s);

struct DistanceOptions {
  int starts_per_axis = 9;  // coarse log-grid per axis (>= 7)
  int refine_starts = 3;    // best coarse points polished per sign
  double rel_tol = 1e-8;
  int max_evals = 2000;
  /// Skip the scan and polish from this point only (warm start).
  std::optional<BubbleParams> guess;
};

struct DistanceReport {
  double d = 0.0;
  double d_plus = 0.0;
  double d_minus = 0.0;
  BubbleParams argmin;
  BubbleParams argmin_plus;
  BubbleParams argmin_minus;
  double fit_residual = 0.0;  // objective minus λ/μ at argmin
  int evaluations = 0;
};

/// Precomputed pieces of the distance objective for one state.
class DistanceObjective {
 public:
  explicit DistanceObjective(const WaveMapState& s);
  /// ‖(ψ − ι(Q_λ − Q_μ), ψ_t)‖²_{H×L²} + λ/μ.
  double operator()(const BubbleParams& p) const;
  double lambda_min() const { return lo_; }
  double lambda_max() const { return hi_; }

 private:
  GridPtr grid_;
  std::vector<double> psi_;
  std::vector<double> psi_r_;
  double kinetic_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

DistanceReport distance(const WaveMapState& s, const DistanceOptions& opt = {});

/// ⟨ψ_t | χ_R r ∂_r ψ⟩.
double virial_pairing(const WaveMapState& s, double R);

/// ∫ψ_t²(1−χ_R) r dr − ½∫(ψ_t² + ψ_r² − sin²ψ/r²)(r/R)χ'(r/R) r dr.
double omega_R(const WaveMapState& s, double R);

std::string to_json(const EnergyReport& e);
std::string to_json(const DistanceReport& d);

}  // namespace wmlab

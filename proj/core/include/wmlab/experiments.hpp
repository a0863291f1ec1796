#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wmlab/evolve.hpp"
#include "wmlab/functionals.hpp"
#include "wmlab/harmonic.hpp"
#include "wmlab/modulation.hpp"
#include "wmlab/rate_fit.hpp"

namespace wmlab {

/// ℓ(t) with ℓ|log ℓ| = 2t², and ℓ'(t) = 4t/(|log ℓ| − 1).
std::pair<double, double> ell_of_t(double t);

/// Grid with dyadic patches [0, nodes_per_level·h_k] added until the
/// finest spacing is at most h_target.
GridPtr make_nested_grid(double r_max, std::size_t n_base, double h_target,
                         double nodes_per_level = 256.0);

struct BlowupData {
  WaveMapState state;
  double t_n = 0.0;
  double ell = 0.0;
  double ell_prime = 0.0;
  double R_n = 0.0;
  double cutoff_radius = 0.0;  // √(R_n ℓ)
  double kinetic_l2 = 0.0;     // ∫ψ₁² r dr
  double energy = 0.0;
};

/// ψ₀ = Q_ℓ − Q, ψ₁ = −ℓ' ΛQ_ℓ̲ on r ≤ √(R_n ℓ), with R_n chosen so the
/// discrete energy (plus analytic tail) equals 8π. The node straddling
/// the cutoff carries a fractional weight so that the energy is
/// continuous in R_n.
BlowupData make_blowup_data(double t_n, const GridPtr& grid);

WaveMapState make_small_bump(double amplitude, double width, const GridPtr& grid);

/// Compactly supported profile amp·(1 − x²)⁴, x = (r − center)/width.
struct Perturbation {
  double amplitude = 0.0;
  double velocity = 0.0;
  double center = 1.0;
  double width = 1.0;
};

WaveMapState make_perturbed_two_bubble(const BubbleParams& p, const Perturbation& pert,
                                       const GridPtr& grid);

struct OdePoint {
  double t = 0.0;
  double zeta = 0.0;
  double b = 0.0;
};

/// ζ = ζ₀ + b₀ s + 4s²/μ₀, b = b₀ + 8s/μ₀ with s = t − t0.
std::vector<OdePoint> mod_ode(double zeta0, double b0, double mu0, double t0,
                              const std::vector<double>& times);

struct GridSpec {
  double r_max = 32.0;
  std::size_t n_base = 2048;
  std::vector<PatchSpec> patches;
  double h_target = 0.0;  // > 0: nested patches down to this spacing
  double nodes_per_level = 256.0;
};

struct DataSpec {
  std::string kind = "two_bubble";  // two_bubble | blowup_s5 | small_bump | perturbed_two_bubble
  BubbleParams bubble{0.05, 1.0, 1};
  double t_n = 0.1;
  bool reverse_time = true;  // blowup_s5: collapse forward in solver time
  double amplitude = 0.1;
  double width = 1.0;
  Perturbation perturbation;
  bool randomize = false;  // jitter the perturbation with the seed
};

struct DiagnosticsSpec {
  bool energies = true;
  bool distance = true;
  bool modulation = true;
  std::vector<double> virial_radii;
  std::vector<double> exterior_radii;
  double eps0 = 0.1;
  double scatter_c = 0.5;
  double scatter_tol = 1e-3;
  bool snapshots = false;
};

struct ExperimentConfig {
  DataSpec data;
  GridSpec grid;
  SolverConfig solver;
  ModConfig modulation;
  DiagnosticsSpec diagnostics;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;
  void validate() const;
};

struct VirialSample {
  double t = 0.0;
  double R = 0.0;
  double pairing = 0.0;
  double omega = 0.0;
  double kinetic = 0.0;  // ∫ψ_t² r dr
};

struct ExperimentResult {
  Trajectory trajectory;
  ModulationTrack track;
  std::vector<VirialSample> virial;
  std::vector<std::pair<double, double>> interior_energy;  // (t, energy in r ≤ c t)
  BlowupEvidence blowup;
  IntervalSplit intervals;
};

GridPtr build_grid(const GridSpec& spec);
WaveMapState build_initial_data(const ExperimentConfig& cfg, const GridPtr& grid);

/// Evolves, records diagnostics at output cadence and writes
/// modulation.csv, virial.csv, manifest.json and events.json into
/// cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string to_json(const IntervalSplit& s);
std::string to_json(const RateFit& f);

}  // namespace wmlab

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "wmlab/field.hpp"
#include "wmlab/harmonic.hpp"

namespace wmlab {

struct ModConfig {
  double L = 100.0;
  double M = 10.0;
  double q_c = 0.05;
  double q_R = 50.0;
  double newton_tol = 1e-12;  // relative to alphaL
  int max_iter = 60;
  /// Tube radius: a fit with ‖g‖²_H + ‖ġ‖² + λ/μ above this is rejected.
  double eta = 0.5;

  void validate() const;
};

struct ModulationPoint {
  double time = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  int iota = 1;
  double zeta = 0.0;
  double b = 0.0;
  double g_h_norm = 0.0;
  double gdot_l2 = 0.0;
  bool converged = false;
  int iterations = 0;
  std::array<double, 2> residual{0.0, 0.0};
  double det = 0.0;
  std::string diagnostic;
};

/// 𝒵 = χ_L ΛQ and its Λ₀ image.
double Zcut(double r, double L);
double Lambda0Zcut(double r, double L);

/// ∫ χ_L (ΛQ)² r dr.
double alphaL(double L);

/// Orthogonality residuals and their Jacobian in (λ, μ).
struct ModSystem {
  std::array<double, 2> F{0.0, 0.0};
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
  double det() const { return a11 * a22 - a12 * a21; }
};

ModSystem modulation_system(const WaveMapState& s, const BubbleParams& p, const ModConfig& cfg);

/// g = ψ − ι(Q_λ − Q_μ) sampled on the state's grid.
FieldSample modulation_remainder(const WaveMapState& s, const BubbleParams& p);

/// Damped Newton on the orthogonality conditions, starting at `guess`.
ModulationPoint fit_modulation(const WaveMapState& s, const ModConfig& cfg,
                               const BubbleParams& guess);

/// Radial profile with q = r²/2 on [0, R], q' = r·m(log(r/R)) beyond,
/// where m decreases from 1 to 0 with |m'| ≤ c. C^{3,1}.
class QFunction {
 public:
  QFunction(double c, double R);

  double c() const { return c_; }
  double R() const { return R_; }
  /// q is constant for r ≥ support().
  double support() const { return support_; }

  double q(double r) const;
  double dq(double r) const;
  double d2q(double r) const;
  /// (∂_r² + r⁻¹∂_r)² q in closed form.
  double bilaplacian(double r) const;

  double m(double s) const;
  double m_s(double s) const;

 private:
  double phi(double s, int order) const;

  double c_ = 0.0;
  double R_ = 0.0;
  double plateau_ = 0.0;
  double support_ = 0.0;
};

struct QCheck {
  double max_p1 = 0.0;        // |q' − r| on r ≤ R
  double max_p2 = 0.0;        // |q'| on r ≥ support
  double max_dq_over_r = 0.0;  // P3
  double max_abs_d2q = 0.0;    // P3
  double min_d2q = 0.0;        // P4
  double min_dq_over_r = 0.0;  // P4
  double max_r2_bilap = 0.0;   // P5: sup r²Δ²q
  double max_abs_multiplier = 0.0;  // P6
  bool ok = false;
};

/// Samples q on `samples` log-spaced radii and checks P1-P6 with finite
/// differences of q' (independent of the closed-form derivatives).
QCheck verify_q(const QFunction& q, int samples = 10000);

/// Builds q and runs verify_q; throws if any property fails.
QFunction build_q(double c, double R);

/// q'(r/λ) ∂_r g.
FieldSample applyA(const QFunction& q, double lambda, const FieldSample& g);
/// (q''(r/λ)/(2λ) + q'(r/λ)/(2r)) g + q'(r/λ) ∂_r g.
FieldSample applyA0(const QFunction& q, double lambda, const FieldSample& g);

struct ZetaB {
  double zeta = 0.0;
  double b = 0.0;
};

ZetaB zeta_b(const WaveMapState& s, const ModulationPoint& pt, const ModConfig& cfg,
             const QFunction& q);

struct Interval {
  double t_lo = 0.0;
  double t_hi = 0.0;
};

struct IntervalSplit {
  std::vector<Interval> bad;   // d ≤ ε₀ throughout
  std::vector<Interval> good;  // d ≥ ε₀/2 throughout
};

/// Hysteresis split of a time-sorted d(t) series. Boundaries are the
/// linearly interpolated threshold crossings.
IntervalSplit split_intervals(std::span<const double> t, std::span<const double> d, double eps0);

struct TrackRow {
  double t = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double zeta = 0.0;
  double b = 0.0;
  double d = 0.0;
  double dplus = 0.0;
  double dminus = 0.0;
  double g_h_norm = 0.0;
  double gdot_l2 = 0.0;
  bool converged = false;
};

class ModulationTrack {
 public:
  void push(const TrackRow& row) { rows_.push_back(row); }
  const std::vector<TrackRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  void write_csv(const std::string& path) const;
  static ModulationTrack read_csv(const std::string& path);

 private:
  std::vector<TrackRow> rows_;
};

}  // namespace wmlab

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wmlab/grid.hpp"

namespace wmlab {

enum class Quantity { Angle, AngularVelocity, Auxiliary };

/// Values of one real field at the nodes of a grid.
class FieldSample {
 public:
  FieldSample(GridPtr grid, std::vector<double> values, Quantity quantity = Quantity::Auxiliary);

  /// Evaluates `fn` at every node.
  static FieldSample sample(GridPtr grid, const std::function<double(double)>& fn,
                            Quantity quantity = Quantity::Auxiliary);
  static FieldSample zeros(GridPtr grid, Quantity quantity = Quantity::Auxiliary);

  const GridPtr& grid() const { return grid_; }
  const RadialGrid& mesh() const { return *grid_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  Quantity quantity() const { return quantity_; }

  /// Angles and angular velocities are odd in r; auxiliary fields get
  /// one-sided stencils at the origin.
  Parity parity() const { return quantity_ == Quantity::Auxiliary ? Parity::None : Parity::Odd; }

  FieldSample derivative() const;

  FieldSample operator+(const FieldSample& o) const;
  FieldSample operator-(const FieldSample& o) const;
  FieldSample operator*(double a) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
  Quantity quantity_;
};

/// Closed-form description of a state beyond r_max. Used to add the
/// analytic tail of integrals over [0, ∞).
struct TailProfile {
  std::function<double(double)> psi;
  std::function<double(double)> psi_r;
  std::function<double(double)> psi_t;  // empty means zero
};

/// Sampled pair (ψ, ∂_tψ) in the degree class ℋ_n, n ∈ {0, 1}.
class WaveMapState {
 public:
  WaveMapState(FieldSample psi, FieldSample psi_t, double time, int degree,
               std::shared_ptr<const TailProfile> tail = nullptr);

  const FieldSample& psi() const { return psi_; }
  const FieldSample& psi_t() const { return psi_t_; }
  double time() const { return time_; }
  int degree() const { return degree_; }
  const GridPtr& grid() const { return psi_.grid(); }
  const std::shared_ptr<const TailProfile>& tail() const { return tail_; }

  WaveMapState with_time(double t) const;
  WaveMapState without_tail() const;

  /// Checks the boundary condition at r_max for the degree class. Throws
  /// Error with the observed boundary value when it is violated.
  void check_membership(double boundary_tol = 1e-3) const;

 private:
  FieldSample psi_;
  FieldSample psi_t_;
  double time_;
  int degree_;
  std::shared_ptr<const TailProfile> tail_;
};

double quad(const FieldSample& f, Weight weight);

/// Same as quad() plus ∫_{r_max}^∞ of the closed-form continuation
/// `tail(r)` against the same weight.
double quad(const FieldSample& f, Weight weight, const std::function<double(double)>& tail);

/// Integral of a closed-form function over [a, b] (b may be +inf).
double integrate_closed_form(const std::function<double(double)>& fn, double a, double b);

double h_norm(const FieldSample& f);
double l2_norm(const FieldSample& f);
double h0_norm(const WaveMapState& s);

/// u = ψ/r and u_t = ψ_t/r, regular at the origin.
std::pair<FieldSample, FieldSample> to_4d(const WaveMapState& s);

/// Inverse of to_4d; ψ(0) = 0 is enforced and the degree is read from the
/// boundary value.
WaveMapState from_4d(const FieldSample& u, const FieldSample& u_t, double time = 0.0);
WaveMapState from_4d(std::span<const double> u, std::span<const double> u_t,
                     const GridPtr& grid, double time = 0.0);

/// Cubic Lagrange interpolation onto `target`; exact on cubics.
FieldSample resample(const FieldSample& f, const GridPtr& target);

/// CSV field dump: header `r,value`, 17 significant digits.
void write_field_csv(const std::string& path, const FieldSample& f);
FieldSample read_field_csv(const std::string& path, Quantity quantity = Quantity::Auxiliary);

/// State file: header `r,psi,psi_t`, one row per node.
void write_state_csv(const std::string& path, const WaveMapState& s);
WaveMapState read_state_csv(const std::string& path, double time = 0.0);

}  // namespace wmlab

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmlab {

/// Raised on violated preconditions and failed numerical postconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetry used to extend a field to r < 0 when a stencil crosses the
/// origin. `None` switches to one-sided stencils instead.
enum class Parity { Even, Odd, None };

/// Quadrature measure on [0, r_max].
enum class Weight { RDr, Dr, DrOverR };

/// A refinement request: the half-open region [r_lo, r_hi] is refined
/// once relative to the previous entry (or the base grid for the first).
struct PatchSpec {
  double r_lo = 0.0;
  double r_hi = 0.0;
};

struct Level {
  double r_lo = 0.0;
  double r_hi = 0.0;
  double spacing = 0.0;
};

class RadialGrid;
using GridPtr = std::shared_ptr<const RadialGrid>;

/// Nested dyadic radial mesh on [0, r_max].
///
/// Node positions are stored internally as integers in units of the finest
/// spacing so that alignment, nesting and stencil lookups are exact. The
/// grid owns precomputed 4th-order first/second derivative operators for
/// each parity and composite Newton-Cotes weights for the dr measure.
class RadialGrid {
 public:
  /// Builds a grid with `n_base` uniform intervals and one refinement level
  /// per entry of `patches`. Throws Error on misaligned or non-nested
  /// patches.
  static GridPtr make(double r_max, std::size_t n_base,
                      std::span<const PatchSpec> patches = {});

  /// Reconstructs the level structure from an explicit node list, e.g. a
  /// field dump read back from disk.
  static GridPtr from_nodes(std::span<const double> nodes);

  double r_max() const { return r_max_; }
  double base_spacing() const { return r_max_ / static_cast<double>(n_base_); }
  std::size_t n_base() const { return n_base_; }
  double h_min() const;
  const std::vector<Level>& levels() const { return levels_; }
  std::vector<PatchSpec> patch_specs() const;

  std::size_t size() const { return nodes_.size(); }
  std::span<const double> nodes() const { return nodes_; }
  double node(std::size_t i) const { return nodes_[i]; }

  /// Index of the last node with position <= r (clamped to the grid).
  std::size_t index_at_or_below(double r) const;

  /// Derivatives on the composite mesh. Applied row by row; values at
  /// patch interfaces use interpolated ghost values where a uniform
  /// stencil is not available.
  std::vector<double> d1(std::span<const double> f, Parity parity) const;
  std::vector<double> d2(std::span<const double> f, Parity parity) const;
  double d1_at(std::span<const double> f, std::size_t i, Parity parity) const;

  /// Composite-quadrature weights for ∫ f dr over [0, r_max].
  std::span<const double> dr_weights() const { return dr_weights_; }

  /// ∫_0^{r_max} f(r) w(r), with the dr/r singularity at the origin
  /// replaced by f'(0). Throws if the dr/r integrand is nonzero at r = 0.
  double integrate(std::span<const double> f, Weight weight) const;

  /// ∫_a^b f dr with a, b anywhere in [0, r_max]: piecewise cubic
  /// interpolant integrated exactly per interval.
  double integrate_range(std::span<const double> f, double a, double b) const;

  bool same_nodes(const RadialGrid& other) const;

  /// Descriptor used in manifests.
  std::string describe() const;

 private:
  struct Csr {
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> cols;
    std::vector<double> vals;
    void apply(std::span<const double> in, std::span<double> out) const;
    double row(std::span<const double> in, std::size_t i) const;
  };

  RadialGrid() = default;
  void build_operators();
  void build_quadrature();
  std::ptrdiff_t find_unit(std::int64_t m) const;
  const Csr& op(int order, Parity parity) const;

  double r_max_ = 0.0;
  std::size_t n_base_ = 0;
  std::vector<Level> levels_;
  std::int64_t units_per_base_ = 1;
  std::vector<std::int64_t> units_;
  std::vector<double> nodes_;
  std::vector<double> dr_weights_;
  Csr d1_[3];
  Csr d2_[3];
};

/// Finite-difference weights (Fornberg). Returns weights[k][j] for the
/// k-th derivative at `x0` from values at `x[j]`, k = 0..max_order.
std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> x,
                                            int max_order);

}  // namespace wmlab

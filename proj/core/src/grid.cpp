#include "wmlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace wmlab {

namespace {

constexpr int kMaxLevels = 24;

int parity_index(Parity p) {
  switch (p) {
    case Parity::Even: return 0;
    case Parity::Odd: return 1;
    case Parity::None: return 2;
  }
  return 2;
}

bool near_multiple(double x, double h, double* k) {
  const double q = x / h;
  const double r = std::round(q);
  *k = r;
  return std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q));
}

}  // namespace

std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> x,
                                            int max_order) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        }
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) {
        c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      }
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

GridPtr RadialGrid::make(double r_max, std::size_t n_base,
                         std::span<const PatchSpec> patches) {
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw Error("make_grid: r_max must be positive");
  if (n_base < 16) throw Error("make_grid: n_base must be at least 16");
  if (patches.size() > kMaxLevels) throw Error("make_grid: too many refinement levels");

  auto g = std::shared_ptr<RadialGrid>(new RadialGrid());
  g->r_max_ = r_max;
  g->n_base_ = n_base;
  const int n_levels = static_cast<int>(patches.size());
  g->units_per_base_ = std::int64_t{1} << n_levels;

  const double h0 = r_max / static_cast<double>(n_base);
  std::vector<std::pair<std::int64_t, std::int64_t>> unit_bounds;
  double parent_lo = 0.0;
  double parent_hi = r_max;
  for (int k = 0; k < n_levels; ++k) {
    const auto& p = patches[k];
    const double parent_h = h0 / std::ldexp(1.0, k);
    if (!(p.r_lo >= 0.0) || !(p.r_hi > p.r_lo)) {
      throw Error("make_grid: patch " + std::to_string(k) + " has an empty or negative range");
    }
    double klo = 0.0;
    double khi = 0.0;
    if (!near_multiple(p.r_lo, parent_h, &klo) || !near_multiple(p.r_hi, parent_h, &khi)) {
      std::ostringstream os;
      os << "make_grid: patch " << k << " [" << p.r_lo << ", " << p.r_hi
         << "] is not aligned to parent nodes (spacing " << parent_h << ")";
      throw Error(os.str());
    }
    const double tol = 1e-9 * parent_h;
    if (p.r_lo < parent_lo - tol || p.r_hi > parent_hi + tol) {
      std::ostringstream os;
      os << "make_grid: patch " << k << " [" << p.r_lo << ", " << p.r_hi
         << "] is not nested in its parent [" << parent_lo << ", " << parent_hi << "]";
      throw Error(os.str());
    }
    const std::int64_t stride = std::int64_t{1} << (n_levels - k);
    unit_bounds.emplace_back(static_cast<std::int64_t>(klo) * stride,
                             static_cast<std::int64_t>(khi) * stride);
    const double h = parent_h / 2.0;
    g->levels_.push_back({klo * parent_h, khi * parent_h, h});
    parent_lo = klo * parent_h;
    parent_hi = khi * parent_h;
  }

  const std::int64_t last = static_cast<std::int64_t>(n_base) * g->units_per_base_;
  std::vector<std::int64_t> units;
  for (std::int64_t m = 0; m <= last; m += g->units_per_base_) units.push_back(m);
  for (int k = 0; k < n_levels; ++k) {
    const std::int64_t stride = std::int64_t{1} << (n_levels - k - 1);
    for (std::int64_t m = unit_bounds[k].first; m <= unit_bounds[k].second; m += stride) {
      units.push_back(m);
    }
  }
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  g->units_ = std::move(units);
  g->nodes_.resize(g->units_.size());
  const double denom = static_cast<double>(last);
  for (std::size_t i = 0; i < g->units_.size(); ++i) {
    g->nodes_[i] = r_max * (static_cast<double>(g->units_[i]) / denom);
  }
  g->nodes_.back() = r_max;

  g->build_quadrature();
  g->build_operators();
  return g;
}

GridPtr RadialGrid::from_nodes(std::span<const double> nodes) {
  if (nodes.size() < 17) throw Error("from_nodes: too few nodes");
  if (nodes.front() != 0.0) throw Error("from_nodes: first node must be 0");
  double hmax = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double h = nodes[i] - nodes[i - 1];
    if (!(h > 0.0)) throw Error("from_nodes: nodes must be strictly increasing");
    hmax = std::max(hmax, h);
  }
  const double r_max = nodes.back();
  const auto n_base = static_cast<std::size_t>(std::llround(r_max / hmax));
  const double h0 = r_max / static_cast<double>(n_base);
  std::vector<PatchSpec> patches;
  for (int k = 1; k <= kMaxLevels; ++k) {
    const double hk = h0 / std::ldexp(1.0, k);
    std::ptrdiff_t lo = -1;
    std::ptrdiff_t hi = -1;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (nodes[i] - nodes[i - 1] <= hk * (1.0 + 1e-6)) {
        if (lo < 0) lo = static_cast<std::ptrdiff_t>(i - 1);
        hi = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (lo < 0) break;
    patches.push_back({nodes[lo], nodes[hi]});
  }
  auto g = make(r_max, n_base, patches);
  if (g->size() != nodes.size()) throw Error("from_nodes: node list is not a nested dyadic grid");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (std::abs(g->nodes_[i] - nodes[i]) > 1e-9 * std::max(1.0, r_max)) {
      throw Error("from_nodes: node list is not a nested dyadic grid");
    }
  }
  return g;
}

double RadialGrid::h_min() const {
  return levels_.empty() ? base_spacing() : levels_.back().spacing;
}

std::vector<PatchSpec> RadialGrid::patch_specs() const {
  std::vector<PatchSpec> out;
  for (const auto& l : levels_) out.push_back({l.r_lo, l.r_hi});
  return out;
}

std::size_t RadialGrid::index_at_or_below(double r) const {
  if (r <= 0.0) return 0;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r * (1.0 + 1e-14));
  if (it == nodes_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(nodes_.begin(), it) - 1);
}

std::ptrdiff_t RadialGrid::find_unit(std::int64_t m) const {
  auto it = std::lower_bound(units_.begin(), units_.end(), m);
  if (it == units_.end() || *it != m) return -1;
  return std::distance(units_.begin(), it);
}

void RadialGrid::build_quadrature() {
  const std::size_t n = nodes_.size();
  dr_weights_.assign(n, 0.0);
  std::size_t a = 0;
  while (a + 1 < n) {
    const std::int64_t s = units_[a + 1] - units_[a];
    std::size_t b = a + 1;
    while (b + 1 < n && units_[b + 1] - units_[b] == s) ++b;
    const std::size_t intervals = b - a;
    if (intervals < 2) {
      throw Error("make_grid: a uniform run with a single interval cannot be integrated to 4th order");
    }
    const double h = nodes_[a + 1] - nodes_[a];
    std::size_t i = a;
    // Simpson 1/3 panels absorb the remainder, 3/8 panels cover the rest.
    std::size_t simpson_panels = intervals % 3 == 0 ? 0 : (intervals % 3 == 1 ? 2 : 1);
    for (std::size_t p = 0; p < simpson_panels; ++p, i += 2) {
      dr_weights_[i] += h / 3.0;
      dr_weights_[i + 1] += 4.0 * h / 3.0;
      dr_weights_[i + 2] += h / 3.0;
    }
    for (; i < b; i += 3) {
      dr_weights_[i] += 3.0 * h / 8.0;
      dr_weights_[i + 1] += 9.0 * h / 8.0;
      dr_weights_[i + 2] += 9.0 * h / 8.0;
      dr_weights_[i + 3] += 3.0 * h / 8.0;
    }
    a = b;
  }
}

void RadialGrid::build_operators() {
  const std::size_t n = nodes_.size();
  const std::int64_t last = units_.back();
  const double unit = r_max_ / static_cast<double>(last);

  auto interp_row = [&](double x, std::map<std::uint32_t, double>& row, double scale) {
    // 6-point Lagrange interpolation from the nearest nodes.
    std::size_t j = index_at_or_below(x);
    std::size_t lo = j >= 2 ? j - 2 : 0;
    if (lo + 6 > n) lo = n - 6;
    std::vector<double> xs(nodes_.begin() + lo, nodes_.begin() + lo + 6);
    auto w = fd_weights(x, xs, 0);
    for (std::size_t k = 0; k < 6; ++k) row[static_cast<std::uint32_t>(lo + k)] += scale * w[0][k];
  };

  for (int pi = 0; pi < 3; ++pi) {
    const Parity parity = pi == 0 ? Parity::Even : (pi == 1 ? Parity::Odd : Parity::None);
    const double mirror_sign = parity == Parity::Odd ? -1.0 : 1.0;
    Csr& o1 = d1_[pi];
    Csr& o2 = d2_[pi];
    o1 = Csr{};
    o2 = Csr{};
    o1.offsets.push_back(0);
    o2.offsets.push_back(0);

    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t m = units_[i];
      const std::int64_t sl = i > 0 ? m - units_[i - 1] : units_[1] - m;
      const std::int64_t sr = i + 1 < n ? units_[i + 1] - m : sl;
      std::int64_t candidates[2] = {std::min(sl, sr), std::max(sl, sr)};

      std::map<std::uint32_t, double> r1;
      std::map<std::uint32_t, double> r2;
      bool done = false;
      for (int pass = 0; pass < 2 && !done; ++pass) {
        for (int ci = 0; ci < 2 && !done; ++ci) {
          const std::int64_t s = candidates[ci];
          bool ok = true;
          bool exact = true;
          std::ptrdiff_t idx[5];
          double sign[5];
          for (int k = -2; k <= 2; ++k) {
            std::int64_t p = m + k * s;
            sign[k + 2] = 1.0;
            if (p < 0) {
              if (parity == Parity::None) { ok = false; break; }
              p = -p;
              sign[k + 2] = mirror_sign;
            }
            if (p > last) { ok = false; break; }
            idx[k + 2] = find_unit(p);
            if (idx[k + 2] < 0) exact = false;
          }
          if (!ok || (pass == 0 && !exact)) continue;
          const double h = unit * static_cast<double>(s);
          static constexpr double w1[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
          static constexpr double w2[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
          for (int k = 0; k < 5; ++k) {
            const double a1 = sign[k] * w1[k] / (12.0 * h);
            const double a2 = sign[k] * w2[k] / (12.0 * h * h);
            if (idx[k] >= 0) {
              r1[static_cast<std::uint32_t>(idx[k])] += a1;
              r2[static_cast<std::uint32_t>(idx[k])] += a2;
            } else {
              const std::int64_t p = m + (k - 2) * s;
              const double x = unit * static_cast<double>(p);
              interp_row(x, r1, a1);
              interp_row(x, r2, a2);
            }
          }
          done = true;
        }
      }
      if (!done) {
        // One-sided: six nearest actual nodes.
        std::size_t lo = i >= 3 ? i - 3 : 0;
        if (lo + 6 > n) lo = n - 6;
        if (i < 3) lo = 0;
        std::vector<double> xs(nodes_.begin() + lo, nodes_.begin() + lo + 6);
        auto w = fd_weights(nodes_[i], xs, 2);
        for (std::size_t k = 0; k < 6; ++k) {
          r1[static_cast<std::uint32_t>(lo + k)] += w[1][k];
          r2[static_cast<std::uint32_t>(lo + k)] += w[2][k];
        }
      }
      for (auto [c, v] : r1) { o1.cols.push_back(c); o1.vals.push_back(v); }
      for (auto [c, v] : r2) { o2.cols.push_back(c); o2.vals.push_back(v); }
      o1.offsets.push_back(static_cast<std::uint32_t>(o1.cols.size()));
      o2.offsets.push_back(static_cast<std::uint32_t>(o2.cols.size()));
    }
  }
}

void RadialGrid::Csr::apply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = offsets.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::uint32_t k = offsets[i]; k < offsets[i + 1]; ++k) acc += vals[k] * in[cols[k]];
    out[i] = acc;
  }
}

double RadialGrid::Csr::row(std::span<const double> in, std::size_t i) const {
  double acc = 0.0;
  for (std::uint32_t k = offsets[i]; k < offsets[i + 1]; ++k) acc += vals[k] * in[cols[k]];
  return acc;
}

const RadialGrid::Csr& RadialGrid::op(int order, Parity parity) const {
  return order == 1 ? d1_[parity_index(parity)] : d2_[parity_index(parity)];
}

std::vector<double> RadialGrid::d1(std::span<const double> f, Parity parity) const {
  if (f.size() != size()) throw Error("d1: field size does not match grid");
  std::vector<double> out(size());
  op(1, parity).apply(f, out);
  return out;
}

std::vector<double> RadialGrid::d2(std::span<const double> f, Parity parity) const {
  if (f.size() != size()) throw Error("d2: field size does not match grid");
  std::vector<double> out(size());
  op(2, parity).apply(f, out);
  return out;
}

double RadialGrid::d1_at(std::span<const double> f, std::size_t i, Parity parity) const {
  return op(1, parity).row(f, i);
}

double RadialGrid::integrate(std::span<const double> f, Weight weight) const {
  if (f.size() != size()) throw Error("quad: field size does not match grid");
  double acc = 0.0;
  switch (weight) {
    case Weight::Dr:
      for (std::size_t i = 0; i < f.size(); ++i) acc += dr_weights_[i] * f[i];
      break;
    case Weight::RDr:
      for (std::size_t i = 1; i < f.size(); ++i) acc += dr_weights_[i] * f[i] * nodes_[i];
      break;
    case Weight::DrOverR: {
      double scale = 1.0;
      for (double v : f) scale = std::max(scale, std::abs(v));
      if (std::abs(f[0]) > 1e-12 * scale) {
        throw Error("quad: dr/r weight requires the integrand to vanish at r = 0");
      }
      acc = dr_weights_[0] * d1_at(f, 0, Parity::None);
      for (std::size_t i = 1; i < f.size(); ++i) acc += dr_weights_[i] * f[i] / nodes_[i];
      break;
    }
  }
  return acc;
}

double RadialGrid::integrate_range(std::span<const double> f, double a, double b) const {
  if (f.size() != size()) throw Error("quad: field size does not match grid");
  a = std::max(a, 0.0);
  b = std::min(b, r_max_);
  if (!(b > a)) return 0.0;
  // 3-point Gauss-Legendre is exact for the cubic interpolant.
  static const double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const std::size_t n = size();
  double acc = 0.0;
  for (std::size_t i = index_at_or_below(a); i + 1 < n && nodes_[i] < b; ++i) {
    const double lo = std::max(a, nodes_[i]);
    const double hi = std::min(b, nodes_[i + 1]);
    if (!(hi > lo)) continue;
    std::size_t first = i >= 1 ? i - 1 : 0;
    if (first + 4 > n) first = n - 4;
    const double* x = nodes_.data() + first;
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    for (int q = 0; q < 3; ++q) {
      const double t = mid + half * gx[q];
      double v = 0.0;
      for (int j = 0; j < 4; ++j) {
        double l = 1.0;
        for (int k = 0; k < 4; ++k) {
          if (k != j) l *= (t - x[k]) / (x[j] - x[k]);
        }
        v += l * f[first + j];
      }
      acc += half * gw[q] * v;
    }
  }
  return acc;
}

bool RadialGrid::same_nodes(const RadialGrid& other) const {
  return r_max_ == other.r_max_ && n_base_ == other.n_base_ && nodes_ == other.nodes_;
}

std::string RadialGrid::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "r_max=" << r_max_ << " n_base=" << n_base_ << " levels=[";
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (k) os << ",";
    os << "(" << levels_[k].r_lo << "," << levels_[k].r_hi << "," << levels_[k].spacing << ")";
  }
  os << "]";
  return os.str();
}

}  // namespace wmlab

#include "wmlab/field.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace wmlab {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string(what) + ": non-finite value");
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != columns) throw Error(path + ": unexpected column count");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

FieldSample::FieldSample(GridPtr grid, std::vector<double> values, Quantity quantity)
    : grid_(std::move(grid)), values_(std::move(values)), quantity_(quantity) {
  if (!grid_) throw Error("FieldSample: null grid");
  if (values_.size() != grid_->size()) throw Error("FieldSample: length does not match node count");
  require_finite(values_, "FieldSample");
}

FieldSample FieldSample::sample(GridPtr grid, const std::function<double(double)>& fn,
                                Quantity quantity) {
  std::vector<double> v(grid->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid->node(i));
  return FieldSample(std::move(grid), std::move(v), quantity);
}

FieldSample FieldSample::zeros(GridPtr grid, Quantity quantity) {
  const std::size_t n = grid->size();
  return FieldSample(std::move(grid), std::vector<double>(n, 0.0), quantity);
}

FieldSample FieldSample::derivative() const {
  return FieldSample(grid_, grid_->d1(values_, parity()), Quantity::Auxiliary);
}

FieldSample FieldSample::operator+(const FieldSample& o) const {
  if (o.grid_ != grid_ && !grid_->same_nodes(*o.grid_)) throw Error("FieldSample: grid mismatch");
  std::vector<double> v(values_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.values_[i];
  return FieldSample(grid_, std::move(v), quantity_);
}

FieldSample FieldSample::operator-(const FieldSample& o) const {
  if (o.grid_ != grid_ && !grid_->same_nodes(*o.grid_)) throw Error("FieldSample: grid mismatch");
  std::vector<double> v(values_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.values_[i];
  return FieldSample(grid_, std::move(v), quantity_);
}

FieldSample FieldSample::operator*(double a) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= a;
  return FieldSample(grid_, std::move(v), quantity_);
}

WaveMapState::WaveMapState(FieldSample psi, FieldSample psi_t, double time, int degree,
                           std::shared_ptr<const TailProfile> tail)
    : psi_(psi.grid(), std::vector<double>(psi.values().begin(), psi.values().end()), Quantity::Angle),
      psi_t_(psi_t.grid(), std::vector<double>(psi_t.values().begin(), psi_t.values().end()),
             Quantity::AngularVelocity),
      time_(time),
      degree_(degree),
      tail_(std::move(tail)) {
  if (psi_.grid() != psi_t_.grid() && !psi_.mesh().same_nodes(psi_t_.mesh())) {
    throw Error("WaveMapState: psi and psi_t live on different grids");
  }
  if (degree != 0 && degree != 1) throw Error("WaveMapState: degree must be 0 or 1");
  if (std::abs(psi_[0]) > 1e-12) throw Error("WaveMapState: psi(0) must vanish");
  psi_.mutable_values()[0] = 0.0;
  if (!std::isfinite(time)) throw Error("WaveMapState: non-finite time");
}

WaveMapState WaveMapState::with_time(double t) const {
  return WaveMapState(psi_, psi_t_, t, degree_, tail_);
}

WaveMapState WaveMapState::without_tail() const {
  return WaveMapState(psi_, psi_t_, time_, degree_, nullptr);
}

void WaveMapState::check_membership(double boundary_tol) const {
  const double end = psi_.values().back();
  const double target = degree_ == 0 ? 0.0 : std::numbers::pi;
  if (!(std::abs(end - target) < boundary_tol)) {
    std::ostringstream os;
    os << "state is not in H_" << degree_ << ": psi(r_max) = " << end
       << ", tolerance " << boundary_tol;
    throw Error(os.str());
  }
  if (!std::isfinite(h0_norm(degree_ == 0 ? *this : without_tail()))) {
    throw Error("state has non-finite norm");
  }
}

double integrate_closed_form(const std::function<double(double)>& fn, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return gauss_kronrod<double, 61>::integrate(fn, a, b, 10, 1e-13, &err);
}

double quad(const FieldSample& f, Weight weight) {
  return f.mesh().integrate(f.values(), weight);
}

double quad(const FieldSample& f, Weight weight, const std::function<double(double)>& tail) {
  double acc = quad(f, weight);
  if (tail) {
    const double inf = std::numeric_limits<double>::infinity();
    switch (weight) {
      case Weight::RDr:
        acc += integrate_closed_form([&](double r) { return tail(r) * r; }, f.mesh().r_max(), inf);
        break;
      case Weight::Dr:
        acc += integrate_closed_form(tail, f.mesh().r_max(), inf);
        break;
      case Weight::DrOverR:
        acc += integrate_closed_form([&](double r) { return tail(r) / r; }, f.mesh().r_max(), inf);
        break;
    }
  }
  return acc;
}

double h_norm(const FieldSample& f) {
  const auto v = f.values();
  if (std::abs(v[0]) > 1e-10 * std::max(1.0, max_abs(v))) {
    throw Error("h_norm: f(0) must vanish (f^2/r^2 is not integrable otherwise)");
  }
  const auto& g = f.mesh();
  const Parity parity = f.quantity() == Quantity::Auxiliary ? Parity::Odd : f.parity();
  const auto d = g.d1(v, parity);
  std::vector<double> integrand(v.size(), 0.0);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double r = g.node(i);
    integrand[i] = d[i] * d[i] * r + v[i] * v[i] / r;
  }
  const double s = g.integrate(integrand, Weight::Dr);
  return std::sqrt(std::max(0.0, s));
}

double l2_norm(const FieldSample& f) {
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = f[i] * f[i];
  return std::sqrt(std::max(0.0, f.mesh().integrate(sq, Weight::RDr)));
}

double h0_norm(const WaveMapState& s) {
  const double a = h_norm(s.psi());
  const double b = l2_norm(s.psi_t());
  return std::sqrt(a * a + b * b);
}

std::pair<FieldSample, FieldSample> to_4d(const WaveMapState& s) {
  const auto& g = s.psi().mesh();
  const std::size_t n = g.size();
  std::vector<double> u(n);
  std::vector<double> ut(n);
  for (std::size_t i = 1; i < n; ++i) {
    u[i] = s.psi()[i] / g.node(i);
    ut[i] = s.psi_t()[i] / g.node(i);
  }
  // u is even in r, so extrapolate in r² (error O(h⁸) instead of O(h⁴)).
  std::vector<double> xs(4);
  for (int k = 0; k < 4; ++k) xs[k] = g.node(k + 1) * g.node(k + 1);
  const auto w = fd_weights(0.0, xs, 0);
  u[0] = 0.0;
  ut[0] = 0.0;
  for (int k = 0; k < 4; ++k) {
    u[0] += w[0][k] * u[k + 1];
    ut[0] += w[0][k] * ut[k + 1];
  }
  return {FieldSample(s.grid(), std::move(u)), FieldSample(s.grid(), std::move(ut))};
}

WaveMapState from_4d(std::span<const double> u, std::span<const double> u_t, const GridPtr& grid,
                     double time) {
  const std::size_t n = grid->size();
  if (u.size() != n || u_t.size() != n) throw Error("from_4d: size mismatch");
  std::vector<double> psi(n);
  std::vector<double> psit(n);
  for (std::size_t i = 0; i < n; ++i) {
    psi[i] = grid->node(i) * u[i];
    psit[i] = grid->node(i) * u_t[i];
  }
  psi[0] = 0.0;
  psit[0] = 0.0;
  const double end = psi.back();
  const int degree = std::abs(end - std::numbers::pi) < std::abs(end) ? 1 : 0;
  return WaveMapState(FieldSample(grid, std::move(psi), Quantity::Angle),
                      FieldSample(grid, std::move(psit), Quantity::AngularVelocity), time, degree);
}

WaveMapState from_4d(const FieldSample& u, const FieldSample& u_t, double time) {
  return from_4d(u.values(), u_t.values(), u.grid(), time);
}

FieldSample resample(const FieldSample& f, const GridPtr& target) {
  const auto& src = f.mesh();
  if (target->r_max() > src.r_max() * (1.0 + 1e-12)) {
    throw Error("resample: target extends beyond the source domain");
  }
  const std::size_t n = src.size();
  const double tol = 1e-12 * std::max(1.0, src.r_max());
  std::vector<double> out(target->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = target->node(i);
    const std::size_t j = src.index_at_or_below(x);
    if (std::abs(src.node(j) - x) <= tol) {
      out[i] = f[j];
      continue;
    }
    if (j + 1 < n && std::abs(src.node(j + 1) - x) <= tol) {
      out[i] = f[j + 1];
      continue;
    }
    std::size_t lo = j >= 1 ? j - 1 : 0;
    if (lo + 4 > n) lo = n - 4;
    const std::vector<double> xs(src.nodes().begin() + lo, src.nodes().begin() + lo + 4);
    const auto w = fd_weights(x, xs, 0);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += w[0][k] * f[lo + k];
    out[i] = acc;
  }
  return FieldSample(target, std::move(out), f.quantity());
}

void write_field_csv(const std::string& path, const FieldSample& f) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw Error("cannot write " + path);
  std::fprintf(fp, "r,value\n");
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::fprintf(fp, "%.17g,%.17g\n", f.mesh().node(i), f[i]);
  }
  std::fclose(fp);
}

FieldSample read_field_csv(const std::string& path, Quantity quantity) {
  const auto rows = read_csv_rows(path, 2);
  std::vector<double> r;
  std::vector<double> v;
  for (const auto& row : rows) {
    r.push_back(row[0]);
    v.push_back(row[1]);
  }
  return FieldSample(RadialGrid::from_nodes(r), std::move(v), quantity);
}

void write_state_csv(const std::string& path, const WaveMapState& s) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw Error("cannot write " + path);
  std::fprintf(fp, "r,psi,psi_t\n");
  for (std::size_t i = 0; i < s.psi().size(); ++i) {
    std::fprintf(fp, "%.17g,%.17g,%.17g\n", s.psi().mesh().node(i), s.psi()[i], s.psi_t()[i]);
  }
  std::fclose(fp);
}

WaveMapState read_state_csv(const std::string& path, double time) {
  const auto rows = read_csv_rows(path, 3);
  std::vector<double> r;
  std::vector<double> psi;
  std::vector<double> psit;
  for (const auto& row : rows) {
    r.push_back(row[0]);
    psi.push_back(row[1]);
    psit.push_back(row[2]);
  }
  auto grid = RadialGrid::from_nodes(r);
  const double end = psi.back();
  const int degree = std::abs(end - std::numbers::pi) < std::abs(end) ? 1 : 0;
  return WaveMapState(FieldSample(grid, std::move(psi), Quantity::Angle),
                      FieldSample(grid, std::move(psit), Quantity::AngularVelocity), time, degree);
}

}  // namespace wmlab

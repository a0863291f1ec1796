#include <algorithm>
#include <cmath>
#include <sstream>

#include "wmlab/modulation.hpp"

namespace wmlab {

namespace {

// Transition widths (in log r) of the rise and fall of -m'(s)/c.
constexpr double kRise = 2.0;
constexpr double kFall = 5.0;

double S(double y) { return y * y * y * (10.0 + y * (-15.0 + 6.0 * y)); }
double S1(double y) { return 30.0 * y * y * (1.0 - y) * (1.0 - y); }
double S2(double y) { return 60.0 * y * (1.0 - y) * (1.0 - 2.0 * y); }
// ∫_0^y S
double IS(double y) { return y * y * y * y * (2.5 + y * (-3.0 + y)); }

}  // namespace

QFunction::QFunction(double c, double R) : c_(c), R_(R) {
  if (!(c > 0.0 && c <= 1.0)) throw Error("build_q: c must lie in (0, 1]");
  if (!(R >= 1.0)) throw Error("build_q: R must be >= 1");
  // The slope of m never exceeds c; for large c it is capped so the
  // transitions keep their width.
  const double slope = std::min(c, 1.0 / (0.5 * (kRise + kFall)));
  c_ = slope;
  plateau_ = 1.0 / slope - 0.5 * (kRise + kFall);
  support_ = R * std::exp(kRise + plateau_ + kFall);
}

double QFunction::phi(double s, int order) const {
  const double s1 = kRise + plateau_;
  if (s <= 0.0 || s >= s1 + kFall) return 0.0;
  if (s < kRise) {
    const double y = s / kRise;
    if (order == 0) return S(y);
    if (order == 1) return S1(y) / kRise;
    return S2(y) / (kRise * kRise);
  }
  if (s <= s1) return order == 0 ? 1.0 : 0.0;
  const double y = (s - s1) / kFall;
  if (order == 0) return 1.0 - S(y);
  if (order == 1) return -S1(y) / kFall;
  return -S2(y) / (kFall * kFall);
}

double QFunction::m(double s) const {
  const double s1 = kRise + plateau_;
  if (s <= 0.0) return 1.0;
  if (s < kRise) return 1.0 - c_ * kRise * IS(s / kRise);
  const double top = 1.0 - 0.5 * c_ * kRise;
  if (s <= s1) return top - c_ * (s - kRise);
  if (s >= s1 + kFall) return 0.0;
  const double y = (s - s1) / kFall;
  return std::max(0.0, top - c_ * plateau_ - c_ * kFall * (y - IS(y)));
}

double QFunction::m_s(double s) const { return -c_ * phi(s, 0); }

double QFunction::q(double r) const {
  if (r <= R_) return 0.5 * r * r;
  const double s = std::log(std::min(r, support_) / R_);
  const double s1 = kRise + plateau_;
  const double R2 = R_ * R_;
  auto f = [&](double x) { return R2 * std::exp(2.0 * x) * m(x); };
  double acc = 0.5 * R2;
  const double cuts[4] = {0.0, kRise, s1, s1 + kFall};
  for (int k = 0; k < 3; ++k) {
    const double a = cuts[k];
    const double b = std::min(s, cuts[k + 1]);
    if (b > a) acc += integrate_closed_form(f, a, b);
  }
  return acc;
}

double QFunction::dq(double r) const {
  if (r <= R_) return r;
  return r * m(std::log(r / R_));
}

double QFunction::d2q(double r) const {
  if (r <= R_) return 1.0;
  const double s = std::log(r / R_);
  return m(s) + m_s(s);
}

double QFunction::bilaplacian(double r) const {
  if (r <= R_) return 0.0;
  const double s = std::log(r / R_);
  return -c_ * (2.0 * phi(s, 1) + phi(s, 2)) / (r * r);
}

QCheck verify_q(const QFunction& qf, int samples) {
  if (samples < 10) throw Error("verify_q: too few samples");
  const double c = qf.c();
  const double R = qf.R();
  auto M = [&](double s) {
    const double r = R * std::exp(s);
    return qf.dq(r) / r;
  };
  const double h1 = 1e-4;
  const double h2 = 1e-2;
  auto Ms = [&](double s) { return (M(s + h1) - M(s - h1)) / (2.0 * h1); };
  auto F = [&](double s) { return 2.0 * M(s) + Ms(s); };  // r²·... = Δq
  QCheck out;
  out.min_d2q = 1.0;
  out.min_dq_over_r = 1.0;
  const double lo = std::log(1e-3 * R);
  const double hi = std::log(2.0 * qf.support());
  for (int i = 0; i < samples; ++i) {
    const double lr = lo + (hi - lo) * i / (samples - 1);
    const double r = std::exp(lr);
    const double s = lr - std::log(R);
    const double dq = qf.dq(r);
    if (r <= R) {
      out.max_p1 = std::max({out.max_p1, std::abs(dq - r), std::abs(qf.q(r) - 0.5 * r * r)});
    }
    if (r >= qf.support()) out.max_p2 = std::max(out.max_p2, std::abs(dq));
    const double ms = Ms(s);
    const double d2q = M(s) + ms;
    out.max_dq_over_r = std::max(out.max_dq_over_r, std::abs(dq / r));
    out.max_abs_d2q = std::max(out.max_abs_d2q, std::abs(d2q));
    out.min_d2q = std::min(out.min_d2q, d2q);
    out.min_dq_over_r = std::min(out.min_dq_over_r, dq / r);
    const double fss = (F(s + h2) - 2.0 * F(s) + F(s - h2)) / (h2 * h2);
    out.max_r2_bilap = std::max(out.max_r2_bilap, fss);
    out.max_abs_multiplier = std::max(out.max_abs_multiplier, std::abs(ms));
  }
  const double tol = 1e-6;
  out.ok = out.max_p1 <= 1e-12 * R * R && out.max_p2 == 0.0 && out.max_dq_over_r <= 1.0 + tol &&
           out.max_abs_d2q <= 1.0 + c + tol && out.min_d2q >= -c - tol &&
           out.min_dq_over_r >= -c - tol && out.max_r2_bilap <= c * (1.0 + 1e-3) + tol &&
           out.max_abs_multiplier <= c + tol;
  return out;
}

QFunction build_q(double c, double R) {
  QFunction q(c, R);
  const auto chk = verify_q(q);
  if (!chk.ok) {
    std::ostringstream os;
    os << "build_q: property check failed (P1 " << chk.max_p1 << ", P2 " << chk.max_p2
       << ", P4 " << chk.min_d2q << ", P5 " << chk.max_r2_bilap << ", P6 "
       << chk.max_abs_multiplier << ")";
    throw Error(os.str());
  }
  return q;
}

FieldSample applyA(const QFunction& q, double lambda, const FieldSample& g) {
  if (!(lambda > 0.0)) throw Error("applyA: lambda must be positive");
  const auto& grid = g.mesh();
  auto d = grid.d1(g.values(), g.parity());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= q.dq(grid.node(i) / lambda);
  return FieldSample(g.grid(), std::move(d));
}

FieldSample applyA0(const QFunction& q, double lambda, const FieldSample& g) {
  if (!(lambda > 0.0)) throw Error("applyA0: lambda must be positive");
  const auto& grid = g.mesh();
  auto d = grid.d1(g.values(), g.parity());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = grid.node(i);
    const double x = r / lambda;
    const double coef = i == 0 ? 1.0 / lambda : (q.d2q(x) / lambda + q.dq(x) / r) * 0.5;
    d[i] = coef * g[i] + q.dq(x) * d[i];
  }
  return FieldSample(g.grid(), std::move(d));
}

}  // namespace wmlab

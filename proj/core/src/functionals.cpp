#include "wmlab/functionals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"

namespace wmlab {

namespace {

constexpr double kPi = std::numbers::pi;

double smoothstep(double y) {
  y = std::clamp(y, 0.0, 1.0);
  return y * y * y * (10.0 + y * (-15.0 + 6.0 * y));
}

struct Simplex2 {
  std::array<std::array<double, 2>, 3> x;
  std::array<double, 3> f;
};

// Nelder-Mead on a box in two variables; points are clamped into the box.
template <class F>
std::pair<std::array<double, 2>, double> nelder_mead(F&& fn, std::array<double, 2> x0, double step,
                                                     double lo, double hi, double rel_tol,
                                                     int max_evals, int& evals) {
  auto clampv = [&](std::array<double, 2> p) {
    p[0] = std::clamp(p[0], lo, hi);
    p[1] = std::clamp(p[1], lo, hi);
    return p;
  };
  auto eval = [&](const std::array<double, 2>& p) {
    ++evals;
    const double v = fn(p);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  Simplex2 s;
  s.x[0] = clampv(x0);
  s.x[1] = clampv({x0[0] + step, x0[1]});
  s.x[2] = clampv({x0[0], x0[1] + step});
  if (s.x[1] == s.x[0]) s.x[1] = clampv({x0[0] - step, x0[1]});
  if (s.x[2] == s.x[0]) s.x[2] = clampv({x0[0], x0[1] - step});
  for (int i = 0; i < 3; ++i) s.f[i] = eval(s.x[i]);
  const int budget = evals + max_evals;
  while (evals < budget) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return s.f[a] < s.f[b]; });
    const int b = idx[0], m = idx[1], w = idx[2];
    const double spread = std::abs(s.f[w] - s.f[b]);
    double diam = 0.0;
    for (int i = 0; i < 3; ++i) {
      diam = std::max(diam, std::hypot(s.x[i][0] - s.x[b][0], s.x[i][1] - s.x[b][1]));
    }
    if ((spread <= rel_tol * std::abs(s.f[b]) || spread < 1e-300) && diam < 1e-6) break;
    if (diam < 1e-12) break;
    const std::array<double, 2> c{0.5 * (s.x[b][0] + s.x[m][0]), 0.5 * (s.x[b][1] + s.x[m][1])};
    auto along = [&](double t) {
      return clampv({c[0] + t * (s.x[w][0] - c[0]), c[1] + t * (s.x[w][1] - c[1])});
    };
    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < s.f[b]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        s.x[w] = xe, s.f[w] = fe;
      } else {
        s.x[w] = xr, s.f[w] = fr;
      }
    } else if (fr < s.f[m]) {
      s.x[w] = xr, s.f[w] = fr;
    } else {
      const bool outside = fr < s.f[w];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, s.f[w])) {
        s.x[w] = xc, s.f[w] = fc;
      } else {
        for (int i : {m, w}) {
          s.x[i] = clampv({0.5 * (s.x[i][0] + s.x[b][0]), 0.5 * (s.x[i][1] + s.x[b][1])});
          s.f[i] = eval(s.x[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (s.f[i] < s.f[best]) best = i;
  }
  return {s.x[best], s.f[best]};
}

bool better(double fa, const BubbleParams& a, double fb, const BubbleParams& b) {
  if (!std::isfinite(fb)) return std::isfinite(fa);
  const double tie = 1e-12 * std::max(std::abs(fa), std::abs(fb));
  if (std::abs(fa - fb) <= tie) return a.lambda / a.mu < b.lambda / b.mu;
  return fa < fb;
}

}  // namespace

double chi(double x) { return 1.0 - smoothstep(x - 1.0); }

double chi_prime(double x) {
  const double y = x - 1.0;
  if (y <= 0.0 || y >= 1.0) return 0.0;
  return -30.0 * y * y * (1.0 - y) * (1.0 - y);
}

std::vector<double> energy_density_r(const WaveMapState& s) {
  const auto& g = s.psi().mesh();
  const auto psi = s.psi().values();
  const auto pt = s.psi_t().values();
  const auto pr = g.d1(psi, Parity::Odd);
  std::vector<double> e(g.size(), 0.0);
  for (std::size_t i = 1; i < e.size(); ++i) {
    const double r = g.node(i);
    const double sn = std::sin(psi[i]);
    e[i] = (pt[i] * pt[i] + pr[i] * pr[i]) * r + sn * sn / r;
  }
  return e;
}

EnergyReport energy(const WaveMapState& s, const std::vector<double>& exterior_radii) {
  const auto& g = s.psi().mesh();
  if (s.psi()[0] != 0.0) throw Error("energy: psi(0) must vanish");
  const auto psi = s.psi().values();
  const auto pt = s.psi_t().values();
  const auto pr = g.d1(psi, Parity::Odd);
  std::vector<double> kin(g.size(), 0.0);
  std::vector<double> pot(g.size(), 0.0);
  for (std::size_t i = 1; i < kin.size(); ++i) {
    const double r = g.node(i);
    const double sn = std::sin(psi[i]);
    kin[i] = pt[i] * pt[i] * r;
    pot[i] = pr[i] * pr[i] * r + sn * sn / r;
  }
  EnergyReport rep;
  rep.kinetic = kPi * g.integrate(kin, Weight::Dr);
  rep.potential = kPi * g.integrate(pot, Weight::Dr);
  const double R = g.r_max();
  if (const auto& tail = s.tail()) {
    const double inf = std::numeric_limits<double>::infinity();
    double tk = 0.0;
    if (tail->psi_t) {
      tk = kPi * integrate_closed_form(
                     [&](double r) {
                       const double v = tail->psi_t(r);
                       return v * v * r;
                     },
                     R, inf);
    }
    const double tp = kPi * integrate_closed_form(
                                [&](double r) {
                                  const double d = tail->psi_r(r);
                                  const double sn = std::sin(tail->psi(r));
                                  return d * d * r + sn * sn / r;
                                },
                                R, inf);
    rep.kinetic += tk;
    rep.potential += tp;
    rep.tail = tk + tp;
  } else {
    // Density times r decaying like r^-3 beyond r_max.
    const std::size_t n = g.size() - 1;
    rep.truncation_estimate = kPi * (kin[n] + pot[n]) * R / 2.0;
  }
  rep.total = rep.kinetic + rep.potential;
  std::vector<double> dens(g.size());
  for (std::size_t i = 0; i < dens.size(); ++i) dens[i] = kin[i] + pot[i];
  for (double Rx : exterior_radii) {
    if (!(Rx >= 0.0) || Rx > R) throw Error("energy: exterior radius outside the domain");
    rep.exterior.emplace_back(Rx, kPi * g.integrate_range(dens, Rx, R));
  }
  return rep;
}

BogomolnyiReport bogomolnyi(const WaveMapState& s) {
  if (s.degree() != 1) throw Error("bogomolnyi: the factorization needs a degree-1 state");
  const auto& g = s.psi().mesh();
  const auto psi = s.psi().values();
  const auto pr = g.d1(psi, Parity::Odd);
  std::vector<double> res(g.size(), 0.0);
  for (std::size_t i = 1; i < res.size(); ++i) {
    const double r = g.node(i);
    const double v = pr[i] - std::sin(psi[i]) / r;
    res[i] = v * v * r;
  }
  BogomolnyiReport out;
  out.residual = kPi * g.integrate(res, Weight::Dr);
  if (const auto& tail = s.tail()) {
    out.residual += kPi * integrate_closed_form(
                              [&](double r) {
                                const double v = tail->psi_r(r) - std::sin(tail->psi(r)) / r;
                                return v * v * r;
                              },
                              g.r_max(), std::numeric_limits<double>::infinity());
  }
  const auto e = energy(s);
  out.energy = e.total;
  out.reconstructed_total = e.kinetic + out.residual + 4.0 * kPi;
  return out;
}

DistanceObjective::DistanceObjective(const WaveMapState& s)
    : grid_(s.grid()),
      psi_(s.psi().values().begin(), s.psi().values().end()),
      psi_r_(s.grid()->d1(s.psi().values(), Parity::Odd)) {
  if (s.degree() != 0) throw Error("distance: state must have degree 0");
  kinetic_ = l2_norm(s.psi_t());
  kinetic_ *= kinetic_;
  lo_ = grid_->h_min();
  hi_ = grid_->r_max();
}

double DistanceObjective::operator()(const BubbleParams& p) const {
  const auto& g = *grid_;
  const auto w = g.dr_weights();
  const double il = 1.0 / p.lambda;
  const double im = 1.0 / p.mu;
  const double s = p.iota;
  double acc = 0.0;
  for (std::size_t i = 1; i < psi_.size(); ++i) {
    const double r = g.node(i);
    const double a = psi_[i] - s * (Q(r * il) - Q(r * im));
    const double b = psi_r_[i] - s * (LambdaQ(r * il) - LambdaQ(r * im)) / r;
    acc += w[i] * (b * b * r + a * a / r);
  }
  return acc + kinetic_ + p.lambda / p.mu;
}

DistanceReport distance(const WaveMapState& s, const DistanceOptions& opt) {
  if (opt.starts_per_axis < 2) throw Error("distance: need at least two starts per axis");
  const DistanceObjective obj(s);
  const double lo = std::log(obj.lambda_min());
  const double hi = std::log(obj.lambda_max());
  DistanceReport rep;
  int evals = 0;
  struct Best {
    double f = std::numeric_limits<double>::infinity();
    BubbleParams p;
  };
  Best best[2];
  for (int k = 0; k < 2; ++k) {
    const int iota = k == 0 ? 1 : -1;
    auto fn = [&](const std::array<double, 2>& x) {
      return obj(BubbleParams{std::exp(x[0]), std::exp(x[1]), iota});
    };
    std::vector<std::pair<double, std::array<double, 2>>> starts;
    double step = 0.5;
    if (opt.guess) {
      starts.push_back({0.0, {std::log(opt.guess->lambda), std::log(opt.guess->mu)}});
      step = 0.1;
    } else {
      const int n = opt.starts_per_axis;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const std::array<double, 2> x{lo + (hi - lo) * i / (n - 1), lo + (hi - lo) * j / (n - 1)};
          ++evals;
          const double v = fn(x);
          if (std::isfinite(v)) starts.push_back({v, x});
        }
      }
      if (starts.empty()) throw Error("distance: objective is not finite at any start");
      std::sort(starts.begin(), starts.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (static_cast<int>(starts.size()) > opt.refine_starts) starts.resize(opt.refine_starts);
      step = 0.5 * (hi - lo) / (n - 1);
    }
    for (const auto& st : starts) {
      auto [x, f] = nelder_mead(fn, st.second, step, lo, hi, opt.rel_tol, opt.max_evals, evals);
      // Restart once from the polished point to shake off a collapsed simplex.
      auto [x2, f2] = nelder_mead(fn, x, 0.05, lo, hi, opt.rel_tol, opt.max_evals, evals);
      if (f2 < f) x = x2, f = f2;
      const BubbleParams p{std::exp(x[0]), std::exp(x[1]), iota};
      if (better(f, p, best[k].f, best[k].p)) best[k] = {f, p};
    }
    if (!std::isfinite(best[k].f)) throw Error("distance: objective is not finite at any start");
  }
  rep.d_plus = best[0].f;
  rep.d_minus = best[1].f;
  rep.argmin_plus = best[0].p;
  rep.argmin_minus = best[1].p;
  const bool plus = better(best[0].f, best[0].p, best[1].f, best[1].p);
  rep.d = plus ? rep.d_plus : rep.d_minus;
  rep.argmin = plus ? rep.argmin_plus : rep.argmin_minus;
  rep.fit_residual = rep.d - rep.argmin.lambda / rep.argmin.mu;
  rep.evaluations = evals;
  return rep;
}

double virial_pairing(const WaveMapState& s, double R) {
  const auto& g = s.psi().mesh();
  if (!(R > 0.0) || R >= g.r_max() / 2.0) throw Error("virial: R must lie in (0, r_max/2)");
  const auto psi = s.psi().values();
  const auto pt = s.psi_t().values();
  const auto pr = g.d1(psi, Parity::Odd);
  std::vector<double> f(g.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double r = g.node(i);
    f[i] = pt[i] * chi(r / R) * pr[i] * r * r;
  }
  return g.integrate(f, Weight::Dr);
}

double omega_R(const WaveMapState& s, double R) {
  const auto& g = s.psi().mesh();
  if (!(R > 0.0) || R >= g.r_max() / 2.0) throw Error("virial: R must lie in (0, r_max/2)");
  const auto psi = s.psi().values();
  const auto pt = s.psi_t().values();
  const auto pr = g.d1(psi, Parity::Odd);
  std::vector<double> f(g.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double r = g.node(i);
    const double x = r / R;
    const double sn = std::sin(psi[i]) / r;
    const double kin = pt[i] * pt[i];
    f[i] = kin * (1.0 - chi(x)) * r -
           0.5 * (kin + pr[i] * pr[i] - sn * sn) * x * chi_prime(x) * r;
  }
  return g.integrate(f, Weight::Dr);
}

std::string to_json(const EnergyReport& e) {
  nlohmann::json j;
  j["total"] = e.total;
  j["kinetic"] = e.kinetic;
  j["potential"] = e.potential;
  j["exterior"] = nlohmann::json::array();
  for (const auto& [R, v] : e.exterior) j["exterior"].push_back({{"R", R}, {"energy", v}});
  return j.dump();
}

std::string to_json(const DistanceReport& d) {
  nlohmann::json j;
  j["d"] = d.d;
  j["d_plus"] = d.d_plus;
  j["d_minus"] = d.d_minus;
  j["lambda"] = d.argmin.lambda;
  j["mu"] = d.argmin.mu;
  j["iota"] = d.argmin.iota;
  j["residual"] = d.fit_residual;
  return j.dump();
}

}  // namespace wmlab

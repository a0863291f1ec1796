#include "wmlab/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wmlab/functionals.hpp"
#include "wmlab/modulation.hpp"
#include "wmlab/rate_fit.hpp"

namespace wmlab {

void SolverConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 0.9)) throw Error("SolverConfig: cfl must lie in (0, 0.9]");
  if (!(t_end >= 0.0)) throw Error("SolverConfig: t_end must be nonnegative");
  if (!(output_dt > 0.0)) throw Error("SolverConfig: output_dt must be positive");
  if (!(refine_trigger > 0.0)) throw Error("SolverConfig: refine_trigger must be positive");
  if (max_levels < 0 || max_levels > 12) throw Error("SolverConfig: max_levels must lie in [0, 12]");
  if (!(boundary_tol > 0.0)) throw Error("SolverConfig: boundary_tol must be positive");
}

double nonlinearity_Z(double psi) {
  const double a = std::abs(psi);
  if (a < 1e-2) {
    const double p2 = a * a;
    return 2.0 / 3.0 - (2.0 / 15.0) * p2 + (4.0 / 315.0) * p2 * p2;
  }
  return (2.0 * a - std::sin(2.0 * a)) / (2.0 * a * a * a);
}

namespace {

void rhs_into(std::span<const double> u, const RadialGrid& grid, std::vector<double>& d1,
              std::vector<double>& out) {
  const std::size_t n = u.size();
  d1 = grid.d1(u, Parity::Even);
  out = grid.d2(u, Parity::Even);
  out[0] = 4.0 * out[0] + nonlinearity_Z(0.0) * u[0] * u[0] * u[0];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double r = grid.node(i);
    const double ui = u[i];
    out[i] += 3.0 * d1[i] / r + nonlinearity_Z(r * ui) * ui * ui * ui;
  }
  out[n - 1] = 0.0;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Finite-difference λ proxy on raw ψ values.
double crossing_radius(const RadialGrid& g, std::span<const double> psi) {
  const double half = 0.5 * std::numbers::pi;
  for (std::size_t i = 1; i < psi.size(); ++i) {
    const double a = std::abs(psi[i]);
    if (a >= half) {
      const double p = std::abs(psi[i - 1]);
      const double w = (half - p) / (a - p);
      return g.node(i - 1) + w * (g.node(i) - g.node(i - 1));
    }
  }
  return std::numeric_limits<double>::infinity();
}

struct Rk4Work {
  std::vector<double> d1, k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v, tu, tv;
};

void rk4(std::vector<double>& u, std::vector<double>& v, double dt, const RadialGrid& g,
         Rk4Work& w) {
  const std::size_t n = u.size();
  w.tu.resize(n);
  w.tv.resize(n);
  rhs_into(u, g, w.d1, w.k1v);
  w.k1u = v;
  for (std::size_t i = 0; i < n; ++i) {
    w.tu[i] = u[i] + 0.5 * dt * w.k1u[i];
    w.tv[i] = v[i] + 0.5 * dt * w.k1v[i];
  }
  rhs_into(w.tu, g, w.d1, w.k2v);
  w.k2u = w.tv;
  for (std::size_t i = 0; i < n; ++i) {
    w.tu[i] = u[i] + 0.5 * dt * w.k2u[i];
    w.tv[i] = v[i] + 0.5 * dt * w.k2v[i];
  }
  rhs_into(w.tu, g, w.d1, w.k3v);
  w.k3u = w.tv;
  for (std::size_t i = 0; i < n; ++i) {
    w.tu[i] = u[i] + dt * w.k3u[i];
    w.tv[i] = v[i] + dt * w.k3v[i];
  }
  rhs_into(w.tu, g, w.d1, w.k4v);
  w.k4u = w.tv;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    u[i] += dt / 6.0 * (w.k1u[i] + 2.0 * w.k2u[i] + 2.0 * w.k3u[i] + w.k4u[i]);
    v[i] += dt / 6.0 * (w.k1v[i] + 2.0 * w.k2v[i] + 2.0 * w.k3v[i] + w.k4v[i]);
  }
}

WaveMapState rebuild(std::span<const double> u, std::span<const double> v, const GridPtr& g,
                     double t, int degree, const std::shared_ptr<const TailProfile>& tail) {
  std::vector<double> psi(u.size());
  std::vector<double> psit(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    psi[i] = g->node(i) * u[i];
    psit[i] = g->node(i) * v[i];
  }
  psi[0] = 0.0;
  psit[0] = 0.0;
  return WaveMapState(FieldSample(g, std::move(psi), Quantity::Angle),
                      FieldSample(g, std::move(psit), Quantity::AngularVelocity), t, degree, tail);
}

}  // namespace

std::vector<double> rhs(std::span<const double> u, const RadialGrid& grid) {
  if (u.size() != grid.size()) throw Error("rhs: size mismatch");
  if (!all_finite(u)) throw Error("rhs: non-finite value in u");
  std::vector<double> d1;
  std::vector<double> out;
  rhs_into(u, grid, d1, out);
  return out;
}

WaveMapState step(const WaveMapState& s, double dt, double cfl) {
  const auto& g = s.psi().mesh();
  if (!(dt > 0.0) || dt > cfl * g.h_min() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "step: dt = " << dt << " violates the CFL bound " << cfl * g.h_min();
    throw Error(os.str());
  }
  auto [uf, vf] = to_4d(s);
  std::vector<double> u(uf.values().begin(), uf.values().end());
  std::vector<double> v(vf.values().begin(), vf.values().end());
  Rk4Work w;
  rk4(u, v, dt, g, w);
  return rebuild(u, v, s.grid(), s.time() + dt, s.degree(), s.tail());
}

double lambda_estimate(const WaveMapState& s) {
  return crossing_radius(s.psi().mesh(), s.psi().values());
}

GridPtr refined_grid(const RadialGrid& g) {
  auto patches = g.patch_specs();
  const double h = g.h_min();
  const double top = patches.empty() ? g.r_max() : patches.back().r_hi;
  double hi = std::floor(0.5 * top / h + 1e-9) * h;
  if (hi < 16.0 * h) hi = std::min(top, 16.0 * h);
  patches.push_back({0.0, hi});
  return RadialGrid::make(g.r_max(), g.n_base(), patches);
}

RegridResult regrid(const WaveMapState& s, const SolverConfig& cfg) {
  const auto& g = s.psi().mesh();
  const double lam = lambda_estimate(s);
  if (!(lam < cfg.refine_trigger * g.h_min())) return {s, false, false};
  if (static_cast<int>(g.levels().size()) >= cfg.max_levels) return {s, false, true};
  const auto ng = refined_grid(g);
  auto [u, ut] = to_4d(s);
  const auto nu = resample(u, ng);
  const auto nut = resample(ut, ng);
  return {rebuild(nu.values(), nut.values(), ng, s.time(), s.degree(), s.tail()), true, false};
}

Trajectory evolve(const WaveMapState& s0, const SolverConfig& cfg,
                  const std::vector<Observer>& observers, WaveMapState* final_state) {
  cfg.validate();
  s0.check_membership(cfg.boundary_tol);
  Trajectory traj;
  const int degree = s0.degree();
  const auto tail = s0.tail();
  WaveMapState cur = s0;
  if (cfg.adaptive) {
    // Bring the initial grid up to the trigger before the first step.
    for (;;) {
      auto rg = regrid(cur, cfg);
      if (!rg.refined) break;
      cur = rg.state;
      ++traj.regrids;
    }
  }
  GridPtr grid = cur.grid();
  auto [uf, vf] = to_4d(cur);
  std::vector<double> u(uf.values().begin(), uf.values().end());
  std::vector<double> v(vf.values().begin(), vf.values().end());

  // Light-cone diagnostic: the data's dynamic support must stay inside r_max.
  {
    const auto acc = rhs(u, *grid);
    double supp = 0.0;
    for (std::size_t i = 1; i < u.size(); ++i) {
      const double r = grid->node(i);
      if (std::abs(v[i]) * r > 1e-10 || std::abs(acc[i]) * r > 1e-10) supp = r;
    }
    if (supp + cfg.t_end >= grid->r_max()) {
      std::ostringstream os;
      os << "dynamic support reaches r = " << supp << "; r + t_end = " << supp + cfg.t_end
         << " is not inside r_max = " << grid->r_max();
      traj.boundary_warning = os.str();
    }
  }

  const double t0 = s0.time();
  double t = t0;
  traj.initial_energy = energy(cur).total;
  const double e0 = traj.initial_energy;
  auto drift = [&](double e) { return e0 != 0.0 ? (e - e0) / e0 : e - e0; };

  auto report_at = [&](double dt, bool regridded) {
    const auto st = rebuild(u, v, grid, t, degree, tail);
    StepReport rep;
    rep.t = t;
    rep.dt = dt;
    rep.energy = energy(st).total;
    rep.relative_energy_drift = drift(rep.energy);
    rep.h_min = grid->h_min();
    rep.lambda_estimate = crossing_radius(*grid, st.psi().values());
    rep.regridded = regridded;
    traj.max_abs_drift = std::max(traj.max_abs_drift, std::abs(rep.relative_energy_drift));
    traj.reports.push_back(rep);
    return std::make_pair(st, rep);
  };
  auto notify = [&](double dt) {
    auto [st, rep] = report_at(dt, false);
    for (const auto& ob : observers) ob(st, rep);
  };

  notify(0.0);
  long k_out = 1;
  Rk4Work work;
  std::vector<double> psi_tmp(u.size());
  const double eps_t = 1e-12 * std::max(1.0, cfg.t_end);
  while (t < t0 + cfg.t_end - eps_t) {
    const double next_out = std::min(t0 + k_out * cfg.output_dt, t0 + cfg.t_end);
    const double dt_max = cfg.cfl * grid->h_min();
    double dt = std::min(dt_max, next_out - t);
    rk4(u, v, dt, *grid, work);
    ++traj.steps;
    const bool hit = std::abs((t + dt) - next_out) <= eps_t;
    t = hit ? next_out : t + dt;

    if (!all_finite(u) || !all_finite(v)) {
      traj.halted = true;
      traj.halt_reason = "nan";
      StepReport rep;
      rep.t = t;
      rep.dt = dt;
      rep.blowup_suspected = true;
      rep.h_min = grid->h_min();
      rep.energy = std::numeric_limits<double>::quiet_NaN();
      traj.reports.push_back(rep);
      break;
    }
    psi_tmp.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) psi_tmp[i] = grid->node(i) * u[i];
    const double lam = crossing_radius(*grid, psi_tmp);
    double grad = 0.0;
    if (hit || (std::isfinite(lam) && lam < cfg.blowup_floor * 16.0)) {
      const auto d = grid->d1(psi_tmp, Parity::Odd);
      for (double x : d) grad = std::max(grad, std::abs(x));
    }
    std::string flag;
    if (lam < cfg.blowup_floor) flag = "blowup_floor";
    if (grad > cfg.gradient_cap) flag = "gradient_cap";
    if (flag.empty() && cfg.adaptive && lam < cfg.refine_trigger * grid->h_min()) {
      if (static_cast<int>(grid->levels().size()) >= cfg.max_levels) {
        flag = "max_levels";
      } else {
        const auto st = rebuild(u, v, grid, t, degree, tail);
        auto rg = regrid(st, cfg);
        if (rg.refined) {
          grid = rg.state.grid();
          auto [nu, nv] = to_4d(rg.state);
          u.assign(nu.values().begin(), nu.values().end());
          v.assign(nv.values().begin(), nv.values().end());
          ++traj.regrids;
          report_at(dt, true);
        }
      }
    }
    if (!flag.empty()) {
      traj.halted = true;
      traj.halt_reason = flag;
      auto [st, rep] = report_at(dt, false);
      traj.reports.back().blowup_suspected = true;
      rep.blowup_suspected = true;
      for (const auto& ob : observers) ob(st, rep);
      break;
    }
    if (hit) {
      notify(dt);
      ++k_out;
    }
  }
  traj.final_time = t;
  if (final_state) *final_state = rebuild(u, v, grid, t, degree, tail);
  return traj;
}

BlowupEvidence detect_blowup(const Trajectory& traj, const ModulationTrack* track) {
  BlowupEvidence ev;
  if (!traj.halted || traj.halt_reason.empty()) return ev;
  ev.declared = true;
  ev.reason = traj.halt_reason;
  if (!traj.reports.empty()) {
    ev.t_trigger = traj.reports.back().t;
    ev.lambda_at_trigger = traj.reports.back().lambda_estimate;
  }
  if (track) {
    // Longest trailing run of converged points with decreasing λ.
    const auto& rows = track->rows();
    std::size_t end = rows.size();
    while (end > 0 && !rows[end - 1].converged) --end;
    std::size_t begin = end;
    while (begin > 0 && rows[begin - 1].converged &&
           (begin == end || rows[begin - 1].lambda > rows[begin].lambda)) {
      --begin;
    }
    if (end - begin >= 20) {
      try {
        const auto fit = fit_blowup_rate(*track, rows[begin].t, rows[end - 1].t);
        ev.T_plus = fit.T_plus;
        ev.C = fit.C;
        ev.rate_fitted = true;
      } catch (const Error&) {
      }
    }
  }
  return ev;
}

}  // namespace wmlab

#include "wmlab/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "wmlab/functionals.hpp"

namespace wmlab {

void ModConfig::validate() const {
  if (!(L >= 10.0)) throw Error("ModConfig: L must be >= 10");
  if (!(M >= 1.0)) throw Error("ModConfig: M must be >= 1");
  if (!(q_c > 0.0 && q_c <= 1.0)) throw Error("ModConfig: q_c must lie in (0, 1]");
  if (!(q_R >= 1.0)) throw Error("ModConfig: q_R must be >= 1");
  if (!(newton_tol > 0.0)) throw Error("ModConfig: newton_tol must be positive");
  if (max_iter < 1) throw Error("ModConfig: max_iter must be positive");
  if (!(eta > 0.0)) throw Error("ModConfig: eta must be positive");
}

double Zcut(double r, double L) { return chi(r / L) * LambdaQ(r); }

double Lambda0Zcut(double r, double L) {
  const double x = r / L;
  return chi(x) * Lambda0LambdaQ(r) + x * chi_prime(x) * LambdaQ(r);
}

double alphaL(double L) {
  auto f = [&](double r) {
    const double v = LambdaQ(r);
    return chi(r / L) * v * v * r;
  };
  return integrate_closed_form(f, 0.0, L) + integrate_closed_form(f, L, 2.0 * L);
}

FieldSample modulation_remainder(const WaveMapState& s, const BubbleParams& p) {
  const auto& g = s.psi().mesh();
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = g.node(i);
    v[i] = s.psi()[i] - p.iota * (Q(r / p.lambda) - Q(r / p.mu));
  }
  v[0] = 0.0;
  return FieldSample(s.grid(), std::move(v), Quantity::Angle);
}

ModSystem modulation_system(const WaveMapState& s, const BubbleParams& p, const ModConfig& cfg) {
  const auto& grid = s.psi().mesh();
  const auto w = grid.dr_weights();
  const double l = p.lambda;
  const double m = p.mu;
  const double io = p.iota;
  const double L = cfg.L;
  double F1 = 0, F2 = 0, zl_ql = 0, zl_qm = 0, zm_ql = 0, zm_qm = 0, lzl_g = 0, lzm_g = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double r = grid.node(i);
    const double g = s.psi()[i] - io * (Q(r / l) - Q(r / m));
    const double wr = w[i] * r;
    const double zl = Zcut(r / l, L) / l;
    const double zm = Zcut(r / m, L) / m;
    const double ql = LambdaQ(r / l) / l;
    const double qm = LambdaQ(r / m) / m;
    F1 += wr * zl * g;
    F2 += wr * zm * g;
    zl_ql += wr * zl * ql;
    zl_qm += wr * zl * qm;
    zm_ql += wr * zm * ql;
    zm_qm += wr * zm * qm;
    lzl_g += wr * Lambda0Zcut(r / l, L) / l * g;
    lzm_g += wr * Lambda0Zcut(r / m, L) / m * g;
  }
  ModSystem out;
  out.F = {F1, F2};
  out.a11 = io * zl_ql - lzl_g / l;
  out.a12 = -io * zl_qm;
  out.a21 = io * zm_ql;
  out.a22 = -io * zm_qm - lzm_g / m;
  return out;
}

ModulationPoint fit_modulation(const WaveMapState& s, const ModConfig& cfg,
                               const BubbleParams& guess) {
  cfg.validate();
  guess.validate();
  ModulationPoint pt;
  pt.time = s.time();
  pt.iota = guess.iota;
  const double alpha = alphaL(cfg.L);
  const double tol = cfg.newton_tol * alpha;
  double x = std::log(guess.lambda);
  double y = std::log(guess.mu);
  auto system_at = [&](double a, double b) {
    return modulation_system(s, BubbleParams{std::exp(a), std::exp(b), guess.iota}, cfg);
  };
  auto norm = [](const ModSystem& m) { return std::max(std::abs(m.F[0]), std::abs(m.F[1])); };
  // Newton direction in (log λ, log μ), capped at unit length.
  auto direction = [&](const ModSystem& m, double& dx, double& dy) {
    const double l = std::exp(x);
    const double u = std::exp(y);
    const double j11 = l * m.a11, j12 = u * m.a12, j21 = l * m.a21, j22 = u * m.a22;
    const double det = j11 * j22 - j12 * j21;
    dx = -(j22 * m.F[0] - j12 * m.F[1]) / det;
    dy = -(-j21 * m.F[0] + j11 * m.F[1]) / det;
    const double cap = std::max(std::abs(dx), std::abs(dy));
    if (cap > 1.0) dx /= cap, dy /= cap;
  };
  ModSystem sys = system_at(x, y);
  bool done = norm(sys) <= tol;
  int it = 0;
  for (; !done && it < cfg.max_iter; ++it) {
    if (!std::isfinite(norm(sys))) {
      pt.diagnostic = "non-finite residual";
      break;
    }
    if (std::abs(sys.det()) <= 1e-12 * alpha * alpha) {
      pt.diagnostic = "singular Jacobian";
      break;
    }
    double dx = 0.0, dy = 0.0;
    direction(sys, dx, dy);
    const double f0 = norm(sys);
    double step = 1.0;
    ModSystem trial;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      trial = system_at(x + step * dx, y + step * dy);
      if (norm(trial) < f0) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      pt.diagnostic = "line search stalled";
      break;
    }
    x += step * dx;
    y += step * dy;
    sys = trial;
    done = norm(sys) <= tol;
  }
  if (done && norm(sys) > 0.0 && std::isfinite(sys.det()) && sys.det() != 0.0) {
    // The residual test is absolute while the parameters are relative, so
    // small scales need one more (quadratically convergent) step.
    double dx = 0.0, dy = 0.0;
    direction(sys, dx, dy);
    const ModSystem trial = system_at(x + dx, y + dy);
    if (norm(trial) <= norm(sys)) {
      x += dx;
      y += dy;
      sys = trial;
    }
  }
  pt.iterations = it;
  pt.lambda = std::exp(x);
  pt.mu = std::exp(y);
  pt.residual = sys.F;
  pt.det = sys.det();
  const auto g = modulation_remainder(s, BubbleParams{pt.lambda, pt.mu, pt.iota});
  pt.g_h_norm = h_norm(g);
  pt.gdot_l2 = l2_norm(s.psi_t());
  pt.converged = done;
  if (!done && pt.diagnostic.empty()) pt.diagnostic = "no convergence within max_iter";
  if (done) {
    const double tube = pt.g_h_norm * pt.g_h_norm + pt.gdot_l2 * pt.gdot_l2 + pt.lambda / pt.mu;
    if (pt.lambda >= pt.mu) {
      pt.converged = false;
      pt.diagnostic = "lambda >= mu";
    } else if (tube > cfg.eta) {
      pt.converged = false;
      std::ostringstream os;
      os << "outside tube: " << tube << " > eta = " << cfg.eta;
      pt.diagnostic = os.str();
    }
  }
  return pt;
}

ZetaB zeta_b(const WaveMapState& s, const ModulationPoint& pt, const ModConfig& cfg,
             const QFunction& q) {
  if (!pt.converged) throw Error("zeta_b: modulation point is not converged");
  if (pt.lambda >= pt.mu) throw Error("zeta_b: requires lambda < mu");
  const auto& grid = s.psi().mesh();
  const auto w = grid.dr_weights();
  const double l = pt.lambda;
  const double neck = cfg.M * std::sqrt(pt.lambda * pt.mu);
  const auto g = modulation_remainder(s, BubbleParams{pt.lambda, pt.mu, pt.iota});
  const auto a0g = applyA0(q, l, g);
  double pg = 0.0, pgd = 0.0, gda0 = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double r = grid.node(i);
    const double k = chi(r / neck) * LambdaQ(r / l) / l;
    const double wr = w[i] * r;
    pg += wr * k * g[i];
    pgd += wr * k * s.psi_t()[i];
    gda0 += wr * s.psi_t()[i] * a0g[i];
  }
  ZetaB out;
  out.zeta = 2.0 * l * std::abs(std::log(l / pt.mu)) - pg;
  out.b = -pgd - gda0;
  return out;
}

IntervalSplit split_intervals(std::span<const double> t, std::span<const double> d, double eps0) {
  if (t.size() != d.size()) throw Error("split_intervals: t and d differ in length");
  if (!(eps0 > 0.0)) throw Error("split_intervals: eps0 must be positive");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw Error("split_intervals: times must be increasing");
  }
  IntervalSplit out;
  if (t.empty()) return out;
  const double lo = 0.5 * eps0;
  bool good = d[0] >= lo;
  double start = t[0];
  auto cross = [&](std::size_t i, double level) {
    const double d0 = d[i - 1], d1 = d[i];
    if (d1 == d0) return t[i];
    const double a = (level - d0) / (d1 - d0);
    return t[i - 1] + std::clamp(a, 0.0, 1.0) * (t[i] - t[i - 1]);
  };
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (good && d[i] < lo) {
      const double tc = cross(i, lo);
      out.good.push_back({start, tc});
      start = tc;
      good = false;
    } else if (!good && d[i] > eps0) {
      const double tc = cross(i, eps0);
      out.bad.push_back({start, tc});
      start = tc;
      good = true;
    }
  }
  (good ? out.good : out.bad).push_back({start, t.back()});
  return out;
}

void ModulationTrack::write_csv(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw Error("cannot write " + path);
  std::fprintf(fp, "t,lambda,mu,zeta,b,d,dplus,dminus,g_h_norm,gdot_l2,converged\n");
  for (const auto& r : rows_) {
    std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.t,
                 r.lambda, r.mu, r.zeta, r.b, r.d, r.dplus, r.dminus, r.g_h_norm, r.gdot_l2,
                 r.converged ? 1 : 0);
  }
  std::fclose(fp);
}

ModulationTrack ModulationTrack::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty track");
  ModulationTrack track;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 11) throw Error(path + ": expected 11 columns");
    track.push(TrackRow{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10] != 0.0});
  }
  return track;
}

}  // namespace wmlab

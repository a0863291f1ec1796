#include "wmlab/experiments.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

namespace wmlab {

namespace {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << text << "\n";
}

template <class T>
void get_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

std::pair<double, double> ell_of_t(double t) {
  if (!(t > 0.0) || !(2.0 * t * t < std::exp(-1.0))) {
    throw Error("ell_of_t: t must satisfy 0 < t and 2t^2 < 1/e");
  }
  const double target = 2.0 * t * t;
  auto f = [&](double l) { return -l * std::log(l) - target; };
  boost::math::tools::eps_tolerance<double> tol(52);
  const auto [a, b] = boost::math::tools::bisect(f, 1e-300, std::exp(-1.0), tol);
  const double ell = 0.5 * (a + b);
  const double lp = 4.0 * t / (std::abs(std::log(ell)) - 1.0);
  return {ell, lp};
}

GridPtr make_nested_grid(double r_max, std::size_t n_base, double h_target,
                         double nodes_per_level) {
  std::vector<PatchSpec> patches;
  const double h0 = r_max / static_cast<double>(n_base);
  double h = h0;
  double top = r_max;
  const int half = static_cast<int>(std::floor(0.5 * nodes_per_level));
  if (half < 8) throw Error("make_nested_grid: nodes_per_level too small");
  while (h > h_target * (1.0 + 1e-12)) {
    double hi = std::min(top, half * h);
    patches.push_back({0.0, hi});
    top = hi;
    h *= 0.5;
    if (patches.size() > 24) throw Error("make_nested_grid: h_target needs too many levels");
  }
  return RadialGrid::make(r_max, n_base, patches);
}

BlowupData make_blowup_data(double t_n, const GridPtr& grid) {
  const auto [ell, lp] = ell_of_t(t_n);
  const auto tail = two_bubble_tail(BubbleParams{ell, 1.0, 1});
  auto psi0 = FieldSample::sample(grid, [&](double r) { return Q(r / ell) - Q(r); }, Quantity::Angle);
  const WaveMapState static_part(psi0, FieldSample::zeros(grid, Quantity::AngularVelocity), 0.0, 0,
                                 tail);
  const double potential = energy(static_part).total;
  const auto& g = *grid;
  auto velocity = [&](double R) {
    const double rc = std::sqrt(R * ell);
    std::vector<double> v(g.size(), 0.0);
    for (std::size_t i = 1; i < g.size(); ++i) {
      const double r = g.node(i);
      double w = 1.0;
      if (r > rc) {
        const double rp = g.node(i - 1);
        if (rp > rc) break;
        w = (rc - rp) / (r - rp);
      }
      v[i] = -lp * LambdaQ(r / ell) / ell * w;
    }
    return v;
  };
  auto kinetic = [&](double R) {
    const auto v = velocity(R);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
    return g.integrate(sq, Weight::RDr);
  };
  const double target = 8.0 * kPi;
  auto f = [&](double logR) { return potential + kPi * kinetic(std::exp(logR)) - target; };
  double lo = std::log(ell);
  double hi = std::log(std::min(1e3, g.r_max() * g.r_max() / ell));
  const double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo < 0.0 && fhi > 0.0)) {
    std::ostringstream os;
    os.precision(12);
    os << "make_blowup_data: no sign change for R_n in [" << std::exp(lo) << ", " << std::exp(hi)
       << "]: E - 8pi = " << flo << ", " << fhi;
    throw Error(os.str());
  }
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, tol, iters);
  // Pick the bracket end with the smaller energy defect.
  const double logR = std::abs(f(a)) <= std::abs(f(b)) ? a : b;
  const double R_n = std::exp(logR);
  WaveMapState state(psi0, FieldSample(grid, velocity(R_n), Quantity::AngularVelocity), 0.0, 0,
                     tail);
  const double e = energy(state).total;
  return BlowupData{std::move(state), t_n, ell, lp, R_n, std::sqrt(R_n * ell), kinetic(R_n), e};
}

WaveMapState make_small_bump(double amplitude, double width, const GridPtr& grid) {
  if (!(width > 0.0)) throw Error("make_small_bump: width must be positive");
  auto psi = FieldSample::sample(
      grid, [&](double r) { return amplitude * r * std::exp(-r * r / (width * width)); },
      Quantity::Angle);
  WaveMapState s(std::move(psi), FieldSample::zeros(grid, Quantity::AngularVelocity), 0.0, 0);
  const double e = energy(s).total;
  if (!(e < 8.0 * kPi)) {
    std::ostringstream os;
    os << "make_small_bump: energy " << e << " is not below 8*pi";
    throw Error(os.str());
  }
  return s;
}

WaveMapState make_perturbed_two_bubble(const BubbleParams& p, const Perturbation& pert,
                                       const GridPtr& grid) {
  p.validate();
  if (!(pert.width > 0.0)) throw Error("perturbation: width must be positive");
  if (pert.center < pert.width) throw Error("perturbation: support must not contain r = 0");
  auto shape = [&](double r) {
    const double x = (r - pert.center) / pert.width;
    if (std::abs(x) >= 1.0) return 0.0;
    const double y = 1.0 - x * x;
    return y * y * y * y;
  };
  auto base = two_bubble(p, grid);
  std::vector<double> psi(base.psi().values().begin(), base.psi().values().end());
  std::vector<double> psit(grid->size(), 0.0);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double s = shape(grid->node(i));
    psi[i] += pert.amplitude * s;
    psit[i] = pert.velocity * s;
  }
  return WaveMapState(FieldSample(grid, std::move(psi), Quantity::Angle),
                      FieldSample(grid, std::move(psit), Quantity::AngularVelocity), 0.0, 0,
                      base.tail());
}

std::vector<OdePoint> mod_ode(double zeta0, double b0, double mu0, double t0,
                              const std::vector<double>& times) {
  if (!(mu0 > 0.0)) throw Error("mod_ode: mu0 must be positive");
  std::vector<OdePoint> out;
  out.reserve(times.size());
  for (double t : times) {
    const double s = t - t0;
    out.push_back({t, zeta0 + b0 * s + 4.0 * s * s / mu0, b0 + 8.0 * s / mu0});
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig c;
  if (j.contains("data")) {
    const auto& d = j["data"];
    get_opt(d, "kind", c.data.kind);
    get_opt(d, "lambda", c.data.bubble.lambda);
    get_opt(d, "mu", c.data.bubble.mu);
    get_opt(d, "iota", c.data.bubble.iota);
    get_opt(d, "t_n", c.data.t_n);
    get_opt(d, "reverse_time", c.data.reverse_time);
    get_opt(d, "amplitude", c.data.amplitude);
    get_opt(d, "width", c.data.width);
    get_opt(d, "randomize", c.data.randomize);
    if (d.contains("perturbation")) {
      const auto& p = d["perturbation"];
      get_opt(p, "amplitude", c.data.perturbation.amplitude);
      get_opt(p, "velocity", c.data.perturbation.velocity);
      get_opt(p, "center", c.data.perturbation.center);
      get_opt(p, "width", c.data.perturbation.width);
    }
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    get_opt(g, "r_max", c.grid.r_max);
    get_opt(g, "n_base", c.grid.n_base);
    get_opt(g, "h_target", c.grid.h_target);
    get_opt(g, "nodes_per_level", c.grid.nodes_per_level);
    if (g.contains("patches")) {
      for (const auto& p : g["patches"]) c.grid.patches.push_back({p.at(0), p.at(1)});
    }
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    get_opt(s, "cfl", c.solver.cfl);
    get_opt(s, "t_end", c.solver.t_end);
    get_opt(s, "output_dt", c.solver.output_dt);
    get_opt(s, "refine_trigger", c.solver.refine_trigger);
    get_opt(s, "max_levels", c.solver.max_levels);
    get_opt(s, "blowup_floor", c.solver.blowup_floor);
    get_opt(s, "gradient_cap", c.solver.gradient_cap);
    get_opt(s, "boundary_tol", c.solver.boundary_tol);
    get_opt(s, "adaptive", c.solver.adaptive);
  }
  if (j.contains("modulation")) {
    const auto& m = j["modulation"];
    get_opt(m, "L", c.modulation.L);
    get_opt(m, "M", c.modulation.M);
    get_opt(m, "q_c", c.modulation.q_c);
    get_opt(m, "q_R", c.modulation.q_R);
    get_opt(m, "newton_tol", c.modulation.newton_tol);
    get_opt(m, "max_iter", c.modulation.max_iter);
    get_opt(m, "eta", c.modulation.eta);
  }
  if (j.contains("diagnostics")) {
    const auto& d = j["diagnostics"];
    get_opt(d, "energies", c.diagnostics.energies);
    get_opt(d, "distance", c.diagnostics.distance);
    get_opt(d, "modulation", c.diagnostics.modulation);
    get_opt(d, "virial_radii", c.diagnostics.virial_radii);
    get_opt(d, "exterior_radii", c.diagnostics.exterior_radii);
    get_opt(d, "eps0", c.diagnostics.eps0);
    get_opt(d, "scatter_c", c.diagnostics.scatter_c);
    get_opt(d, "scatter_tol", c.diagnostics.scatter_tol);
    get_opt(d, "snapshots", c.diagnostics.snapshots);
  }
  get_opt(j, "output_dir", c.output_dir);
  get_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["data"] = {{"kind", data.kind},
               {"lambda", data.bubble.lambda},
               {"mu", data.bubble.mu},
               {"iota", data.bubble.iota},
               {"t_n", data.t_n},
               {"reverse_time", data.reverse_time},
               {"amplitude", data.amplitude},
               {"width", data.width},
               {"randomize", data.randomize},
               {"perturbation",
                {{"amplitude", data.perturbation.amplitude},
                 {"velocity", data.perturbation.velocity},
                 {"center", data.perturbation.center},
                 {"width", data.perturbation.width}}}};
  json patches = json::array();
  for (const auto& p : grid.patches) patches.push_back({p.r_lo, p.r_hi});
  j["grid"] = {{"r_max", grid.r_max},
               {"n_base", grid.n_base},
               {"h_target", grid.h_target},
               {"nodes_per_level", grid.nodes_per_level},
               {"patches", patches}};
  j["solver"] = {{"cfl", solver.cfl},
                 {"t_end", solver.t_end},
                 {"output_dt", solver.output_dt},
                 {"refine_trigger", solver.refine_trigger},
                 {"max_levels", solver.max_levels},
                 {"blowup_floor", solver.blowup_floor},
                 {"gradient_cap", solver.gradient_cap},
                 {"boundary_tol", solver.boundary_tol},
                 {"adaptive", solver.adaptive}};
  j["modulation"] = {{"L", modulation.L},
                     {"M", modulation.M},
                     {"q_c", modulation.q_c},
                     {"q_R", modulation.q_R},
                     {"newton_tol", modulation.newton_tol},
                     {"max_iter", modulation.max_iter},
                     {"eta", modulation.eta}};
  j["diagnostics"] = {{"energies", diagnostics.energies},
                      {"distance", diagnostics.distance},
                      {"modulation", diagnostics.modulation},
                      {"virial_radii", diagnostics.virial_radii},
                      {"exterior_radii", diagnostics.exterior_radii},
                      {"eps0", diagnostics.eps0},
                      {"scatter_c", diagnostics.scatter_c},
                      {"scatter_tol", diagnostics.scatter_tol},
                      {"snapshots", diagnostics.snapshots}};
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  static const char* kinds[] = {"two_bubble", "blowup_s5", "small_bump", "perturbed_two_bubble"};
  if (std::find(std::begin(kinds), std::end(kinds), data.kind) == std::end(kinds)) {
    throw Error("config: unknown data kind '" + data.kind + "'");
  }
  solver.validate();
  modulation.validate();
  for (double R : diagnostics.virial_radii) {
    if (!(R > 0.0) || R >= grid.r_max / 2.0) throw Error("config: virial radius must be < r_max/2");
  }
  for (double R : diagnostics.exterior_radii) {
    if (!(R >= 0.0) || R >= grid.r_max) throw Error("config: exterior radius must be < r_max");
  }
  if (!(diagnostics.eps0 > 0.0)) throw Error("config: eps0 must be positive");
}

GridPtr build_grid(const GridSpec& spec) {
  if (spec.h_target > 0.0) {
    return make_nested_grid(spec.r_max, spec.n_base, spec.h_target, spec.nodes_per_level);
  }
  return RadialGrid::make(spec.r_max, spec.n_base, spec.patches);
}

WaveMapState build_initial_data(const ExperimentConfig& cfg, const GridPtr& grid) {
  const auto& d = cfg.data;
  if (d.kind == "two_bubble") return two_bubble(d.bubble, grid);
  if (d.kind == "small_bump") return make_small_bump(d.amplitude, d.width, grid);
  if (d.kind == "perturbed_two_bubble") {
    Perturbation p = d.perturbation;
    if (d.randomize) {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> u(0.5, 1.0);
      p.amplitude *= u(rng);
      p.velocity *= u(rng);
    }
    return make_perturbed_two_bubble(d.bubble, p, grid);
  }
  auto bd = make_blowup_data(d.t_n, grid);
  if (!d.reverse_time) return bd.state;
  auto v = bd.state.psi_t() * -1.0;
  return WaveMapState(bd.state.psi(), v, 0.0, 0, bd.state.tail());
}

std::string to_json(const IntervalSplit& s) {
  json j;
  j["bad"] = json::array();
  j["good"] = json::array();
  for (const auto& i : s.bad) j["bad"].push_back({i.t_lo, i.t_hi});
  for (const auto& i : s.good) j["good"].push_back({i.t_lo, i.t_hi});
  return j.dump();
}

std::string to_json(const RateFit& f) {
  json j;
  j["T_plus"] = f.T_plus;
  j["C"] = f.C;
  j["window"] = {f.t_lo, f.t_hi};
  j["rms_residual"] = f.rms_residual;
  j["points"] = f.points;
  return j.dump();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  if (cfg.diagnostics.snapshots) fs::create_directories(out_dir / "snapshots");

  const auto grid = build_grid(cfg.grid);
  const auto s0 = build_initial_data(cfg, grid);
  const QFunction q = build_q(cfg.modulation.q_c, cfg.modulation.q_R);

  ExperimentResult res;
  std::optional<BubbleParams> guess;
  json snapshots = json::array();
  int snap_index = 0;

  Observer diag = [&](const WaveMapState& s, const StepReport& rep) {
    TrackRow row;
    row.t = s.time();
    row.d = row.dplus = row.dminus = std::numeric_limits<double>::quiet_NaN();
    row.lambda = row.mu = row.zeta = row.b = std::numeric_limits<double>::quiet_NaN();
    row.gdot_l2 = l2_norm(s.psi_t());
    row.g_h_norm = std::numeric_limits<double>::quiet_NaN();
    std::optional<BubbleParams> fit_guess = guess;
    if (cfg.diagnostics.distance) {
      DistanceOptions opt;
      opt.guess = guess;
      const auto dr = distance(s, opt);
      row.d = dr.d;
      row.dplus = dr.d_plus;
      row.dminus = dr.d_minus;
      if (!fit_guess) fit_guess = dr.argmin;
      guess = dr.argmin;
    }
    if (cfg.diagnostics.modulation && fit_guess) {
      auto pt = fit_modulation(s, cfg.modulation, *fit_guess);
      row.g_h_norm = pt.g_h_norm;
      if (pt.converged) {
        const auto zb = zeta_b(s, pt, cfg.modulation, q);
        row.lambda = pt.lambda;
        row.mu = pt.mu;
        row.zeta = zb.zeta;
        row.b = zb.b;
        row.converged = true;
        guess = BubbleParams{pt.lambda, pt.mu, pt.iota};
      }
    }
    res.track.push(row);
    for (double R : cfg.diagnostics.virial_radii) {
      VirialSample v;
      v.t = s.time();
      v.R = R;
      v.pairing = virial_pairing(s, R);
      v.omega = omega_R(s, R);
      const double k = l2_norm(s.psi_t());
      v.kinetic = k * k;
      res.virial.push_back(v);
    }
    if (s.time() > 0.0) {
      const double rad = cfg.diagnostics.scatter_c * (s.time() - s0.time());
      const auto e = energy(s, {std::min(rad, s.grid()->r_max())});
      res.interior_energy.emplace_back(s.time(), e.total - e.tail - e.exterior[0].second);
    }
    if (cfg.diagnostics.snapshots) {
      char name[64];
      std::snprintf(name, sizeof(name), "snap_%05d.csv", snap_index++);
      write_state_csv((out_dir / "snapshots" / name).string(), s);
      snapshots.push_back({{"t", s.time()},
                           {"file", std::string("snapshots/") + name},
                           {"grid", s.grid()->describe()},
                           {"energy", rep.energy},
                           {"relative_energy_drift", rep.relative_energy_drift},
                           {"h_min", rep.h_min},
                           {"lambda_estimate", std::isfinite(rep.lambda_estimate)
                                                   ? json(rep.lambda_estimate)
                                                   : json(nullptr)}});
    }
  };

  auto flush = [&]() {
    res.track.write_csv((out_dir / "modulation.csv").string());
    std::FILE* fp = std::fopen((out_dir / "virial.csv").string().c_str(), "w");
    if (!fp) throw Error("cannot write virial.csv");
    std::fprintf(fp, "t,R,pairing,omega,kinetic\n");
    for (const auto& v : res.virial) {
      std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", v.t, v.R, v.pairing, v.omega, v.kinetic);
    }
    std::fclose(fp);
  };

  try {
    res.trajectory = evolve(s0, cfg.solver, {diag});
  } catch (...) {
    flush();
    throw;
  }
  flush();

  res.blowup = detect_blowup(res.trajectory, &res.track);
  std::vector<double> ts;
  std::vector<double> ds;
  for (const auto& r : res.track.rows()) {
    if (std::isfinite(r.d)) {
      ts.push_back(r.t);
      ds.push_back(r.d);
    }
  }
  res.intervals = split_intervals(ts, ds, cfg.diagnostics.eps0);

  json manifest;
  manifest["config"] = json::parse(cfg.to_json());
  manifest["initial_grid"] = grid->describe();
  manifest["steps"] = res.trajectory.steps;
  manifest["regrids"] = res.trajectory.regrids;
  manifest["initial_energy"] = res.trajectory.initial_energy;
  manifest["max_abs_relative_drift"] = res.trajectory.max_abs_drift;
  manifest["final_time"] = res.trajectory.final_time;
  manifest["boundary_warning"] = res.trajectory.boundary_warning;
  json reps = json::array();
  for (const auto& r : res.trajectory.reports) {
    reps.push_back({{"t", r.t},
                    {"dt", r.dt},
                    {"energy", std::isfinite(r.energy) ? json(r.energy) : json(nullptr)},
                    {"relative_energy_drift", std::isfinite(r.relative_energy_drift)
                                                  ? json(r.relative_energy_drift)
                                                  : json(nullptr)},
                    {"h_min", r.h_min},
                    {"lambda_estimate",
                     std::isfinite(r.lambda_estimate) ? json(r.lambda_estimate) : json(nullptr)},
                    {"regridded", r.regridded},
                    {"blowup_suspected", r.blowup_suspected}});
  }
  manifest["reports"] = reps;
  manifest["snapshots"] = snapshots;
  manifest["files"] = {"modulation.csv", "virial.csv", "events.json"};
  write_text(out_dir / "manifest.json", manifest.dump(2));

  json events;
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  events["blowup"] = {{"declared", res.blowup.declared},
                      {"T_plus", num(res.blowup.T_plus)},
                      {"C", num(res.blowup.C)},
                      {"reason", res.blowup.reason},
                      {"t_trigger", res.blowup.t_trigger}};
  events["intervals"] = json::parse(to_json(res.intervals));
  events["intervals"]["eps0"] = cfg.diagnostics.eps0;
  if (!res.interior_energy.empty()) {
    const auto& [t, e] = res.interior_energy.back();
    events["scattering_proxy"] = {{"t", t},
                                  {"radius", cfg.diagnostics.scatter_c * (t - s0.time())},
                                  {"interior_energy", e},
                                  {"below_tolerance", e <= cfg.diagnostics.scatter_tol}};
  }
  write_text(out_dir / "events.json", events.dump(2));
  return res;
}

}  // namespace wmlab

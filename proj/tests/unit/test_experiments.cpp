#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "support.hpp"
#include "wmlab/experiments.hpp"

using namespace wmlab;
using testsupport::kPi;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Cmd {
  int status = -1;
  std::string out;
};

Cmd run(const std::string& args) {
  const std::string cmd = std::string(WMLAB_CLI_PATH) + " " + args + " 2>/dev/null";
  Cmd c;
  std::FILE* p = popen(cmd.c_str(), "r");
  if (!p) return c;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) c.out.append(buf.data(), n);
  c.status = pclose(p);
  return c;
}

}  // namespace

TEST_CASE("ell_of_t") {
  const auto [ell, lp] = ell_of_t(0.1);
  CHECK(ell == doctest::Approx(3.54e-3).epsilon(5e-3));
  CHECK(-ell * std::log(ell) == doctest::Approx(0.02).epsilon(1e-14));
  double prev = 0.0;
  for (double t = 0.01; t < 0.42; t += 0.01) {
    const auto [l, d] = ell_of_t(t);
    CHECK(l > prev);
    CHECK(l < std::exp(-1.0));
    CHECK(d * (std::abs(std::log(l)) - 1.0) == doctest::Approx(4 * t).epsilon(1e-12));
    // derivative agrees with a centred difference
    const double h = 1e-6 * t;
    const double fd = (ell_of_t(t + h).first - ell_of_t(t - h).first) / (2 * h);
    CHECK(d == doctest::Approx(fd).epsilon(1e-6));
    prev = l;
  }
  CHECK(ell_of_t(1e-4).first < 1e-7);
  CHECK_THROWS_AS(ell_of_t(0.0), Error);
  CHECK_THROWS_AS(ell_of_t(-0.1), Error);
  CHECK_THROWS_AS(ell_of_t(0.43), Error);
}

TEST_CASE("blow-up data construction") {
  const double tn = 0.15;
  const auto [ell, lp] = ell_of_t(tn);
  auto g = make_nested_grid(64.0, 2048, ell / 64.0);
  auto bd = make_blowup_data(tn, g);
  CHECK(bd.ell == ell);
  CHECK(bd.ell_prime == lp);
  // independent re-check of the root-find postcondition
  const double e = energy(bd.state).total;
  CHECK(std::abs(e / (8 * kPi) - 1.0) <= 1e-9);
  CHECK(bd.R_n > 0.1);
  CHECK(bd.R_n < 1e3);
  CHECK(bd.cutoff_radius == doctest::Approx(std::sqrt(bd.R_n * ell)));
  std::vector<double> sq;
  for (double v : bd.state.psi_t().values()) sq.push_back(v * v);
  CHECK(g->integrate(sq, Weight::RDr) == doctest::Approx(bd.kinetic_l2).epsilon(1e-12));
  // psi_0 = Q_ell - Q and the velocity vanishes beyond the cutoff
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = g->node(i);
    CHECK(bd.state.psi()[i] == Q_scaled(r, ell) - Q(r));
    if (r > bd.cutoff_radius + g->base_spacing()) CHECK(bd.state.psi_t()[i] == 0.0);
  }
}

TEST_CASE("small bump data") {
  auto g = RadialGrid::make(16.0, 1024);
  auto z = make_small_bump(0.0, 1.0, g);
  for (double v : z.psi().values()) CHECK(v == 0.0);
  CHECK(energy(z).total == 0.0);

  auto s = make_small_bump(0.1, 1.0, g);
  CHECK(s.degree() == 0);
  CHECK(s.psi()[0] == 0.0);
  auto dens = [](double r) {
    if (r == 0.0) return 0.0;
    const double e = std::exp(-r * r);
    const double psi = 0.1 * r * e;
    const double pr = 0.1 * e * (1.0 - 2.0 * r * r);
    const double sn = std::sin(psi) / r;
    return (pr * pr + sn * sn) * r;
  };
  const double oracle = kPi * integrate_closed_form(dens, 0.0, std::numeric_limits<double>::infinity());
  const double rel = std::abs(energy(s).total / oracle - 1.0);
  CHECK(rel <= 1e-6);
  auto fine = make_small_bump(0.1, 1.0, RadialGrid::make(16.0, 2048));
  CHECK(std::abs(energy(fine).total / oracle - 1.0) < rel / 12.0);
  CHECK(energy(s).total < 8 * kPi);
  CHECK_THROWS_AS(make_small_bump(50.0, 1.0, g), Error);
  CHECK_THROWS_AS(make_small_bump(0.1, 0.0, g), Error);
}

TEST_CASE("perturbed two-bubble") {
  auto g = make_nested_grid(32.0, 1024, 0.05 / 32.0);
  const BubbleParams p{0.05, 1.0, -1};
  auto exact = two_bubble(p, g);
  auto same = make_perturbed_two_bubble(p, {}, g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    CHECK(same.psi()[i] == exact.psi()[i]);
    CHECK(same.psi_t()[i] == 0.0);
  }
  auto pert = make_perturbed_two_bubble(p, {0.01, 0.02, 3.0, 1.0}, g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = g->node(i);
    if (r <= 2.0 || r >= 4.0) {
      CHECK(pert.psi()[i] == exact.psi()[i]);
      CHECK(pert.psi_t()[i] == 0.0);
    }
  }
  CHECK(pert.psi_t()[g->index_at_or_below(3.0)] == doctest::Approx(0.02));
  CHECK_THROWS_AS(make_perturbed_two_bubble(p, {0.01, 0.0, 0.5, 1.0}, g), Error);
}

TEST_CASE("modulation ODE comparator") {
  std::vector<double> ts;
  for (double t = 0.0; t <= 0.1; t += 0.005) ts.push_back(t);
  const double tn = 0.1;
  // matched constants: ζ(t) = 4t², b(t) = 8t when run from t_n
  auto m = mod_ode(4 * tn * tn, 8 * tn, 1.0, tn, ts);
  REQUIRE(m.size() == ts.size());
  for (const auto& p : m) {
    CHECK(p.zeta == doctest::Approx(4 * p.t * p.t).scale(1.0).epsilon(1e-14));
    CHECK(p.b == doctest::Approx(8 * p.t).scale(1.0).epsilon(1e-14));
    if (p.t > 0.0) {
      CHECK(p.zeta >= p.t * p.t);
      CHECK(p.zeta <= 148 * p.t * p.t);
    }
  }
  auto z = mod_ode(0.0, 0.0, 1.0, 0.0, ts);
  for (const auto& p : z) CHECK(p.b == 8 * p.t);
  auto half = mod_ode(0.0, 0.0, 2.0, 0.0, ts);
  for (std::size_t i = 0; i < ts.size(); ++i) CHECK(half[i].b == doctest::Approx(0.5 * z[i].b));
  CHECK_THROWS_AS(mod_ode(0.0, 0.0, 0.0, 0.0, ts), Error);
}

TEST_CASE("experiment config JSON") {
  auto d = ExperimentConfig::from_json("{}");
  CHECK(d.data.kind == "two_bubble");
  CHECK(d.seed == 1);
  auto c = ExperimentConfig::from_json(R"({
    "data": {"kind": "perturbed_two_bubble", "lambda": 0.02, "mu": 1.5, "iota": -1,
             "perturbation": {"amplitude": 0.01, "center": 3.0}},
    "grid": {"r_max": 48, "n_base": 1536, "patches": [[0, 12], [0, 6]]},
    "solver": {"cfl": 0.4, "t_end": 2.5},
    "modulation": {"L": 10},
    "diagnostics": {"virial_radii": [8], "exterior_radii": [1, 4]},
    "output_dir": "somewhere", "seed": 7})");
  CHECK(c.data.kind == "perturbed_two_bubble");
  CHECK(c.data.bubble.iota == -1);
  CHECK(c.data.perturbation.center == 3.0);
  CHECK(c.grid.patches.size() == 2);
  CHECK(c.solver.cfl == 0.4);
  CHECK(c.modulation.L == 10.0);
  CHECK(c.diagnostics.exterior_radii.size() == 2);
  CHECK(c.seed == 7);
  const auto text = c.to_json();
  CHECK(ExperimentConfig::from_json(text).to_json() == text);
  CHECK(build_grid(c.grid)->patch_specs().size() == 2);

  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data": {"kind": "nope"}})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"diagnostics": {"virial_radii": [20]}})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"diagnostics": {"exterior_radii": [40]}})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"solver": {"cfl": 2}})"), Error);
  CHECK_THROWS(ExperimentConfig::from_json("{not json"));
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/cfg.json"), Error);
}

TEST_CASE("zero data experiment") {
  const auto dir = testsupport::scratch_dir("zero");
  ExperimentConfig cfg;
  cfg.data.bubble = {1.0, 1.0, 1};
  cfg.grid.r_max = 16.0;
  cfg.grid.n_base = 256;
  cfg.solver.t_end = 0.5;
  cfg.solver.output_dt = 0.1;
  cfg.output_dir = dir.string();
  auto res = run_experiment(cfg);
  CHECK(res.trajectory.reports.size() == 6);
  for (const auto& r : res.trajectory.reports) CHECK(r.energy == 0.0);
  REQUIRE(res.track.size() == 6);
  for (const auto& r : res.track.rows()) CHECK(r.d == res.track.rows().front().d);
  for (const char* f : {"modulation.csv", "virial.csv", "manifest.json", "events.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  auto ev = nlohmann::json::parse(slurp(dir / "events.json"));
  CHECK_FALSE(ev["blowup"]["declared"].get<bool>());
  CHECK(ev["intervals"].contains("bad"));
  CHECK(ev["intervals"].contains("good"));
  auto back = ModulationTrack::read_csv((dir / "modulation.csv").string());
  CHECK(back.size() == 6);
}

TEST_CASE("experiments are deterministic") {
  ExperimentConfig cfg;
  cfg.data.kind = "perturbed_two_bubble";
  cfg.data.bubble = {0.1, 1.0, 1};
  cfg.data.perturbation = {0.01, 0.01, 3.0, 1.0};
  cfg.data.randomize = true;
  cfg.seed = 11;
  cfg.grid = {16.0, 512, {}, 0.1 / 32.0, 256.0};
  cfg.solver.t_end = 0.1;
  cfg.solver.output_dt = 0.02;
  cfg.solver.boundary_tol = 0.2;
  cfg.diagnostics.virial_radii = {4.0};
  std::string csv[2], vir[2];
  for (int k = 0; k < 2; ++k) {
    const auto dir = testsupport::scratch_dir("det" + std::to_string(k));
    cfg.output_dir = dir.string();
    auto res = run_experiment(cfg);
    CHECK(res.track.size() == 6);
    CHECK(res.virial.size() == 6);
    csv[k] = slurp(dir / "modulation.csv");
    vir[k] = slurp(dir / "virial.csv");
  }
  CHECK(csv[0] == csv[1]);
  CHECK(vir[0] == vir[1]);
  CHECK(csv[0].size() > 100);
}

TEST_CASE("small bump scatters out of the unit ball") {
  auto g = RadialGrid::make(32.0, 1024);
  auto s = make_small_bump(0.1, 1.0, g);
  SolverConfig cfg;
  cfg.t_end = 10.0;
  cfg.output_dt = 0.5;
  std::vector<std::pair<double, double>> local;
  evolve(s, cfg, {[&](const WaveMapState& st, const StepReport&) {
           const auto e = energy(st, {1.0});
           local.emplace_back(st.time(), e.total - e.tail - e.exterior[0].second);
         }});
  const double e0 = local.front().second;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [t, e] : local) {
    if (t < 3.0) continue;
    CHECK(e <= prev);
    prev = e;
  }
  CHECK(local.back().second < 1e-3 * e0);

  // the same proxy as reported by an experiment run
  const auto dir = testsupport::scratch_dir("scatter");
  ExperimentConfig ec;
  ec.data.kind = "small_bump";
  ec.grid = {32.0, 1024, {}, 0.0, 256.0};
  ec.solver.t_end = 10.0;
  ec.solver.output_dt = 1.0;
  ec.diagnostics.distance = false;
  ec.diagnostics.modulation = false;
  ec.output_dir = dir.string();
  run_experiment(ec);
  auto ev = nlohmann::json::parse(slurp(dir / "events.json"));
  CHECK(ev["scattering_proxy"]["below_tolerance"].get<bool>());
  CHECK(ev["scattering_proxy"]["radius"].get<double>() == doctest::Approx(5.0));
}

TEST_CASE("command-line interface") {
  const auto dir = testsupport::scratch_dir("cli");
  const auto state = (dir / "state.csv").string();
  auto mk = run("make-data --kind blowup_s5 --tn 0.15 --out " + state);
  REQUIRE(mk.status == 0);
  auto mj = nlohmann::json::parse(mk.out);
  CHECK(mj["ell"].get<double>() == doctest::Approx(ell_of_t(0.15).first));
  CHECK(mj["energy"].get<double>() == doctest::Approx(8 * kPi).epsilon(1e-9));

  auto ds = run("distance --state " + state);
  REQUIRE(ds.status == 0);
  auto dj = nlohmann::json::parse(ds.out);
  CHECK(dj["d"].get<double>() >= 0.0);
  CHECK(dj["iota"].get<int>() == 1);

  ModulationTrack track;
  for (int k = 0; k < 30; ++k) {
    TrackRow r;
    r.t = 0.1 + 0.01 * k;
    r.lambda = ell_of_t(0.5 - r.t).first;
    r.mu = 1.0;
    r.d = k < 15 ? 0.02 : 0.5;
    r.converged = true;
    track.push(r);
  }
  const auto csv = (dir / "track.csv").string();
  track.write_csv(csv);
  auto fr = run("fit-rate --track " + csv + " --window 0 1");
  REQUIRE(fr.status == 0);
  auto fj = nlohmann::json::parse(fr.out);
  CHECK(fj["T_plus"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fj["C"].get<double>() == doctest::Approx(2.0).epsilon(1e-9));

  auto sp = run("split-intervals --track " + csv + " --eps0 0.1");
  REQUIRE(sp.status == 0);
  auto sj = nlohmann::json::parse(sp.out);
  CHECK(sj["bad"].size() == 1);
  CHECK(sj["good"].size() == 1);

  const auto cfg_path = dir / "cfg.json";
  std::ofstream(cfg_path) << R"({"data": {"lambda": 1, "mu": 1},
    "grid": {"r_max": 8, "n_base": 128}, "solver": {"t_end": 0.2, "output_dt": 0.1}})";
  auto sim = run("simulate --config " + cfg_path.string() + " --out " + (dir / "run").string());
  REQUIRE(sim.status == 0);
  CHECK(std::filesystem::exists(dir / "run" / "manifest.json"));

  CHECK(run("").status != 0);
  CHECK(run("make-data --kind small_bump --out x.csv").status != 0);
  CHECK(run("fit-rate --track " + csv + " --window 0.4 0.41").status != 0);
  CHECK(run("distance --state /nonexistent.csv").status != 0);
}

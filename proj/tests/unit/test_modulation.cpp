#include "doctest.h"

#include <cmath>
#include <fstream>
#include <vector>

#include "support.hpp"
#include "wmlab/experiments.hpp"
#include "wmlab/modulation.hpp"

using namespace wmlab;
using testsupport::kPi;

namespace {

GridPtr deep_grid() {
  static GridPtr g = make_nested_grid(512.0, 4096, 5e-5 / 16.0);
  return g;
}

// L² norm of Λ₀ΛQ_λ̲ − 𝒜₀(λ)ΛQ_λ for the default q (measured 0.1195,
// independent of λ); pinned.
constexpr double kC0Lambda = 0.125;

}  // namespace

TEST_CASE("truncated resonance") {
  for (double r : {0.0, 0.5, 10.0, 99.0, 100.0}) CHECK(Zcut(r, 100.0) == LambdaQ(r));
  for (double r : {200.0, 250.0, 1e4}) CHECK(Zcut(r, 100.0) == 0.0);
  const double h = 1e-5;
  for (double r : {0.3, 5.0, 120.0, 170.0}) {
    const double d = (Zcut(r + h, 100.0) - Zcut(r - h, 100.0)) / (2 * h);
    CHECK(Lambda0Zcut(r, 100.0) == doctest::Approx(Zcut(r, 100.0) + r * d).epsilon(1e-7));
  }
}

TEST_CASE("alphaL grows like 4 log L") {
  for (double L : {50.0, 100.0, 400.0, 1000.0}) {
    const double ratio = alphaL(L) / std::log(L);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
  // oracle: ∫χ_L (ΛQ)² r dr with the cutoff split out
  const double L = 100.0;
  const double head = 2.0 * (std::log1p(L * L) + 1.0 / (1.0 + L * L) - 1.0);
  const double collar = integrate_closed_form(
      [&](double r) { return chi(r / L) * LambdaQ(r) * LambdaQ(r) * r; }, L, 2 * L);
  CHECK(alphaL(L) == doctest::Approx(head + collar).epsilon(1e-12));
}

TEST_CASE("fit_modulation recovers exact two-bubbles") {
  auto g = deep_grid();
  ModConfig cfg;
  testsupport::Gen gen(41);
  for (int trial = 0; trial < 12; ++trial) {
    const double mu = gen.uniform(0.5, 2.0);
    const BubbleParams p{mu * gen.log_uniform(1e-4, 1e-1), mu, gen.sign()};
    auto pt = fit_modulation(two_bubble(p, g), cfg, {2 * p.lambda, 0.5 * p.mu, p.iota});
    REQUIRE(pt.converged);
    CHECK(std::abs(pt.lambda / p.lambda - 1.0) <= 1e-10);
    CHECK(std::abs(pt.mu / p.mu - 1.0) <= 1e-10);
    CHECK(std::abs(pt.residual[0]) <= cfg.newton_tol * alphaL(cfg.L));
    CHECK(std::abs(pt.residual[1]) <= cfg.newton_tol * alphaL(cfg.L));
    CHECK(pt.g_h_norm < 1e-8);
  }
}

TEST_CASE("fit_modulation rejects states outside the tube") {
  auto g = deep_grid();
  ModConfig cfg;
  Perturbation pert{0.0, 3.0, 4.0, 2.0};
  auto s = make_perturbed_two_bubble({0.01, 1.0, 1}, pert, g);
  auto pt = fit_modulation(s, cfg, {0.01, 1.0, 1});
  CHECK_FALSE(pt.converged);
  CHECK(pt.diagnostic.find("tube") != std::string::npos);
  ModConfig bad;
  bad.L = 5.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Jacobian structure") {
  auto g = deep_grid();
  ModConfig cfg;
  const double alpha = alphaL(cfg.L);
  std::vector<double> ls, la12;
  for (double sigma : {1e-4, 2e-4, 5e-4, 1e-3}) {
    auto sys = modulation_system(two_bubble({sigma, 1.0, 1}, g), {sigma, 1.0, 1}, cfg);
    CHECK(std::abs(sys.a11 - alpha) <= 0.1 * alpha);
    CHECK(std::abs(sys.a22 + alpha) <= 0.1 * alpha);
    CHECK(std::abs(sys.a21) <= 2.0 * std::log(cfg.L) * 4.0);
    CHECK(sys.det() < 0.0);
    ls.push_back(std::log(sigma));
    la12.push_back(std::log(std::abs(sys.a12)));
  }
  // least-squares slope of log|A₁₂| against log(λ/μ)
  const double n = static_cast<double>(ls.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    sx += ls[i], sy += la12[i], sxx += ls[i] * ls[i], sxy += ls[i] * la12[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("q profile") {
  const double c = 0.05, R = 50.0;
  auto q = build_q(c, R);
  CHECK(q.q(R / 2) == doctest::Approx(R * R / 8));
  CHECK(q.dq(R / 2) == R / 2);
  CHECK(q.support() == doctest::Approx(R * std::exp(1.0 / c + 3.5)).epsilon(1e-12));
  for (double r : {q.support(), 1.0001 * q.support(), 10 * q.support()}) CHECK(q.dq(r) == 0.0);
  CHECK(q.q(2 * q.support()) == q.q(q.support()));
  testsupport::Gen gen(43);
  for (int i = 0; i < 2000; ++i) {
    const double r = gen.log_uniform(1e-2, 2 * q.support());
    CHECK(q.d2q(r) >= -c - 1e-12);
    CHECK(q.dq(r) / r >= -c - 1e-12);
    CHECK(q.dq(r) >= 0.0);
    // closed-form derivatives against differences of the lower one; q
    // itself is only known to quadrature accuracy, so skip where q' ≪ q/r
    const double h = 1e-4 * r;
    if (q.dq(r) >= 0.01 * r) {
      CHECK(q.dq(r) == doctest::Approx((q.q(r + h) - q.q(r - h)) / (2 * h)).epsilon(1e-6));
    }
    CHECK(q.d2q(r) == doctest::Approx((q.dq(r + h) - q.dq(r - h)) / (2 * h)).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("q passes its property check on a dense sample") {
  const auto chk = verify_q(QFunction(0.05, 50.0), 10000);
  CHECK(chk.ok);
  CHECK(chk.max_p1 < 1e-9);
  CHECK(chk.max_p2 == 0.0);
  CHECK(chk.min_d2q >= -0.05);
  CHECK(chk.min_dq_over_r >= -0.05);
  CHECK(chk.max_abs_multiplier <= 0.05 * (1.0 + 1e-6));
  CHECK_THROWS_AS(build_q(0.0, 50.0), Error);
  CHECK_THROWS_AS(build_q(0.05, 0.5), Error);
  CHECK(verify_q(QFunction(1.0, 2.0)).ok);
}

TEST_CASE("bilaplacian matches a finite-difference oracle") {
  QFunction q(0.05, 50.0);
  auto lap = [&](double r) { return q.d2q(r) + q.dq(r) / r; };
  testsupport::Gen gen(47);
  for (int i = 0; i < 200; ++i) {
    const double r = 50.0 * std::exp(gen.uniform(0.05, 23.0));
    const double h = 1e-4 * r;
    const double d1 = (lap(r + h) - lap(r - h)) / (2 * h);
    const double d2 = (lap(r + h) - 2 * lap(r) + lap(r - h)) / (h * h);
    const double fd = d2 + d1 / r;
    CHECK(r * r * q.bilaplacian(r) == doctest::Approx(r * r * fd).epsilon(1e-4).scale(0.05));
  }
}

TEST_CASE("operators reduce to scaled generators inside λR") {
  auto g = make_nested_grid(32.0, 1024, 1.0 / 512.0);
  auto q = build_q(0.05, 50.0);
  testsupport::Gen gen(53);
  const double lam = 0.1;
  for (int trial = 0; trial < 5; ++trial) {
    auto v = FieldSample(g, gen.bump(*g, 0.2, 2.0, 2.5), Quantity::Angle);
    auto a = applyA(q, lam, v);
    auto a0 = applyA0(q, lam, v);
    auto l = lambda_gen(v);
    auto l0 = lambda0_gen(v);
    for (std::size_t i = 0; i < g->size(); ++i) {
      CHECK(a[i] == doctest::Approx(l[i] / lam).epsilon(1e-12).scale(1.0));
      CHECK(a0[i] == doctest::Approx(l0[i] / lam).epsilon(1e-12).scale(1.0));
    }
  }
  auto z = applyA0(q, lam, FieldSample::zeros(g, Quantity::Angle));
  for (double x : z.values()) CHECK(x == 0.0);
}

TEST_CASE("A0 is antisymmetric and bounded uniformly in λ") {
  auto g = make_nested_grid(64.0, 2048, 1e-3 / 1024.0);
  auto q = build_q(0.05, 50.0);
  testsupport::Gen gen(59);
  auto bump = [&](double c, double amp) {
    return FieldSample::sample(
        g,
        [&](double r) {
          const double x = (r - c) / (0.4 * c);
          const double y = std::abs(x) < 1.0 ? 1.0 - x * x : 0.0;
          return amp * y * y * y * y;
        },
        Quantity::Angle);
  };
  auto pairing = [&](const FieldSample& v, const FieldSample& w) {
    std::vector<double> p(g->size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = v[i] * w[i];
    return quad(FieldSample(g, p), Weight::RDr);
  };
  for (double lam : {1e-3, 1e-2, 1e-1, 1.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto v = bump(lam * gen.log_uniform(0.5, 16.0), gen.uniform(-1.0, 1.0));
      auto av = applyA0(q, lam, v);
      CHECK(std::abs(pairing(v, av)) <= 1e-6 * l2_norm(v) * l2_norm(av));
    }
  }
  // The ratio depends only on where the bump sits relative to λ.
  for (double x : {0.5, 2.0, 10.0, 16.0}) {
    double lo = 1e300, hi = 0.0;
    for (double lam : {1e-3, 1e-2, 1e-1, 1.0}) {
      auto v = bump(lam * x, 1.0);
      const double ratio = l2_norm(applyA0(q, lam, v)) / h_norm(v);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    CHECK(hi <= 1.01 * lo);
    CHECK(hi <= 2.0 * x + 5.0);
  }
}

TEST_CASE("A0 nearly reproduces the resonance image") {
  auto q = build_q(0.05, 50.0);
  for (double lam : {0.01, 0.1}) {
    auto g = make_nested_grid(512.0, 4096, lam / 64.0);
    auto lq = FieldSample::sample(g, [&](double r) { return LambdaQ(r / lam); }, Quantity::Angle);
    auto a0 = applyA0(q, lam, lq);
    std::vector<double> diff(g->size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = Lambda0LambdaQ(g->node(i) / lam) / lam - a0[i];
    CHECK(l2_norm(FieldSample(g, diff)) <= kC0Lambda);
  }
}

TEST_CASE("zeta and b on exact and static states") {
  auto g = deep_grid();
  ModConfig cfg;
  auto q = build_q(cfg.q_c, cfg.q_R);
  auto s = two_bubble({0.01, 1.0, 1}, g);
  auto pt = fit_modulation(s, cfg, {0.02, 0.8, 1});
  REQUIRE(pt.converged);
  auto zb = zeta_b(s, pt, cfg, q);
  CHECK(zb.zeta == doctest::Approx(0.02 * std::log(100.0)).epsilon(1e-10));
  CHECK(zb.b == 0.0);

  Perturbation pert{0.05, 0.0, 3.0, 1.0};
  auto ps = make_perturbed_two_bubble({0.01, 1.0, 1}, pert, g);
  auto pp = fit_modulation(ps, cfg, {0.01, 1.0, 1});
  REQUIRE(pp.converged);
  CHECK(zeta_b(ps, pp, cfg, q).b == 0.0);

  ModulationPoint wrong = pt;
  wrong.lambda = 2.0;
  CHECK_THROWS_AS(zeta_b(s, wrong, cfg, q), Error);
  ModulationPoint loose = pt;
  loose.converged = false;
  CHECK_THROWS_AS(zeta_b(s, loose, cfg, q), Error);
}

TEST_CASE("split_intervals trivial cases") {
  std::vector<double> t{0.0, 1.0, 2.0, 3.0};
  const double e = 0.2;
  std::vector<double> low(4, e / 4);
  auto a = split_intervals(t, low, e);
  REQUIRE(a.bad.size() == 1);
  CHECK(a.good.empty());
  CHECK(a.bad[0].t_lo == 0.0);
  CHECK(a.bad[0].t_hi == 3.0);
  std::vector<double> mid(4, e);
  auto b = split_intervals(t, mid, e);
  REQUIRE(b.good.size() == 1);
  CHECK(b.bad.empty());
  auto c = split_intervals({}, {}, e);
  CHECK(c.good.empty());
  CHECK(c.bad.empty());
}

TEST_CASE("split_intervals honours the hysteresis band") {
  const double e = 0.1;
  // dips into (ε₀/2, ε₀] never leave the good state; rises into the band
  // never leave the bad state
  std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<double> d{0.2, 0.06, 0.2, 0.04, 0.09, 0.1, 0.11, 0.3};
  auto s = split_intervals(t, d, e);
  REQUIRE(s.good.size() == 2);
  REQUIRE(s.bad.size() == 1);
  CHECK(s.good[0].t_lo == 0.0);
  CHECK(s.good[0].t_hi == doctest::Approx(2.0 + 0.15 / 0.16));
  CHECK(s.bad[0].t_lo == s.good[0].t_hi);
  CHECK(s.bad[0].t_hi == doctest::Approx(5.0));
  CHECK(s.good[1].t_lo == s.bad[0].t_hi);
  CHECK(s.good[1].t_hi == 7.0);
}

TEST_CASE("split_intervals on a triangle wave") {
  const double e = 0.1, period = 1.0, top = 0.25, dt = 1e-3;
  auto tri = [&](double t) {
    const double x = std::fmod(t, period) / period;
    return top * (x < 0.5 ? 1.0 - 2.0 * x : 2.0 * x - 1.0);
  };
  std::vector<double> t, d;
  for (double x = 0.0; x <= 3.0 + 1e-12; x += dt) t.push_back(x), d.push_back(tri(x));
  auto s = split_intervals(t, d, e);
  // falling through ε₀/2 at x = (1 − 0.2)/2, rising through ε₀ at 1 − (1 − 0.4)/2
  const double down = 0.5 * (1.0 - 0.5 * e / top);
  const double up = 1.0 - 0.5 * (1.0 - e / top);
  REQUIRE(s.bad.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(s.bad[k].t_lo - (k + down)) <= dt);
    CHECK(std::abs(s.bad[k].t_hi - (k + up)) <= dt);
  }
}

TEST_CASE("track CSV round trip") {
  auto dir = testsupport::scratch_dir("track");
  ModulationTrack tr;
  for (int i = 0; i < 5; ++i) {
    tr.push({0.1 * i, 1e-3 / (i + 1), 1.0, 0.01, -0.5 + i, 0.2, 0.2, 0.3, 1e-3, 0.4, i % 2 == 0});
  }
  const auto path = (dir / "modulation.csv").string();
  tr.write_csv(path);
  auto back = ModulationTrack::read_csv(path);
  REQUIRE(back.size() == tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(back.rows()[i].lambda == tr.rows()[i].lambda);
    CHECK(back.rows()[i].b == tr.rows()[i].b);
    CHECK(back.rows()[i].converged == tr.rows()[i].converged);
  }
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,lambda,mu,zeta,b,d,dplus,dminus,g_h_norm,gdot_l2,converged");
}

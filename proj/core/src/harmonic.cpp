#include "wmlab/harmonic.hpp"

#include <cmath>
#include <numbers>

namespace wmlab {

void BubbleParams::validate() const {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw Error("BubbleParams: scales must be positive");
  if (iota != 1 && iota != -1) throw Error("BubbleParams: iota must be +1 or -1");
}

double Q(double r) { return 2.0 * std::atan(r); }

double Q_scaled(double r, double lambda) { return Q(r / lambda); }

double LambdaQ(double r) { return 2.0 * r / (1.0 + r * r); }

double Lambda2Q(double r) {
  const double s = 1.0 + r * r;
  return 2.0 * r * (1.0 - r * r) / (s * s);
}

double Lambda3Q(double r) {
  const double r2 = r * r;
  const double s = 1.0 + r2;
  return 2.0 * r * (r2 * r2 - 6.0 * r2 + 1.0) / (s * s * s);
}

double Lambda0LambdaQ(double r) {
  const double s = 1.0 + r * r;
  return 4.0 * r / (s * s);
}

FieldSample lambda_gen(const FieldSample& f) {
  const auto& g = f.mesh();
  auto d = g.d1(f.values(), f.parity());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= g.node(i);
  return FieldSample(f.grid(), std::move(d), f.quantity());
}

FieldSample lambda0_gen(const FieldSample& f) {
  auto v = lambda_gen(f).mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += f[i];
  return FieldSample(f.grid(), std::move(v), f.quantity());
}

std::shared_ptr<const TailProfile> two_bubble_tail(const BubbleParams& p) {
  auto t = std::make_shared<TailProfile>();
  const double l = p.lambda;
  const double m = p.mu;
  const double s = p.iota;
  t->psi = [=](double r) { return s * (Q(r / l) - Q(r / m)); };
  t->psi_r = [=](double r) { return s * (LambdaQ(r / l) - LambdaQ(r / m)) / r; };
  return t;
}

std::shared_ptr<const TailProfile> single_bubble_tail(double lambda) {
  auto t = std::make_shared<TailProfile>();
  t->psi = [=](double r) { return Q(r / lambda); };
  t->psi_r = [=](double r) { return LambdaQ(r / lambda) / r; };
  return t;
}

WaveMapState two_bubble(const BubbleParams& p, const GridPtr& grid) {
  p.validate();
  auto psi = FieldSample::sample(
      grid, [&](double r) { return p.iota * (Q(r / p.lambda) - Q(r / p.mu)); }, Quantity::Angle);
  return WaveMapState(std::move(psi), FieldSample::zeros(grid, Quantity::AngularVelocity), 0.0, 0,
                      two_bubble_tail(p));
}

WaveMapState single_bubble(double lambda, const GridPtr& grid) {
  if (!(lambda > 0.0)) throw Error("single_bubble: lambda must be positive");
  auto psi = FieldSample::sample(grid, [&](double r) { return Q(r / lambda); }, Quantity::Angle);
  return WaveMapState(std::move(psi), FieldSample::zeros(grid, Quantity::AngularVelocity), 0.0, 1,
                      single_bubble_tail(lambda));
}

}  // namespace wmlab

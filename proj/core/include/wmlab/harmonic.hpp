#pragma once

#include "wmlab/field.hpp"

namespace wmlab {

/// Scales and sign of ι(Q_λ − Q_μ).
struct BubbleParams {
  double lambda = 1.0;
  double mu = 1.0;
  int iota = 1;

  bool well_separated() const { return lambda / mu < 1.0; }
  void validate() const;
};

double Q(double r);
double Q_scaled(double r, double lambda);

// Closed forms of the scaling generators applied to Q.
double LambdaQ(double r);
double Lambda2Q(double r);
double Lambda3Q(double r);
double Lambda0LambdaQ(double r);

/// r ∂_r f and (1 + r ∂_r) f using the grid stencils.
FieldSample lambda_gen(const FieldSample& f);
FieldSample lambda0_gen(const FieldSample& f);

/// ψ = ι(Q_λ − Q_μ), ψ_t = 0, degree 0. The closed form is attached as tail.
WaveMapState two_bubble(const BubbleParams& p, const GridPtr& grid);

/// ψ = Q_λ, ψ_t = 0, degree 1, with tail.
WaveMapState single_bubble(double lambda, const GridPtr& grid);

std::shared_ptr<const TailProfile> two_bubble_tail(const BubbleParams& p);
std::shared_ptr<const TailProfile> single_bubble_tail(double lambda);

}  // namespace wmlab

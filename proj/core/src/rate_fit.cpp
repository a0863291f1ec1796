#include "wmlab/rate_fit.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace wmlab {

RateFit fit_blowup_rate(std::span<const double> t, std::span<const double> lambda) {
  if (t.size() != lambda.size()) throw Error("fit_blowup_rate: size mismatch");
  if (t.size() < 20) throw Error("fit_blowup_rate: need at least 20 points in the window");
  std::vector<double> tt(t.begin(), t.end());
  std::vector<double> s(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0 && !(t[i] > t[i - 1])) throw Error("fit_blowup_rate: times must increase");
    if (i > 0 && !(lambda[i] < lambda[i - 1])) {
      throw Error("fit_blowup_rate: lambda is not decreasing in the window");
    }
    if (!(lambda[i] > 0.0 && lambda[i] < 1.0)) {
      throw Error("fit_blowup_rate: lambda must lie in (0, 1)");
    }
    s[i] = std::sqrt(lambda[i] * std::abs(std::log(lambda[i])));
  }
  // s = a T − a t is linear in (a, aT): centred normal equations.
  const double n = static_cast<double>(tt.size());
  double tm = 0.0, sm = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) tm += tt[i], sm += s[i];
  tm /= n;
  sm /= n;
  double stt = 0.0, sts = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    stt += (tt[i] - tm) * (tt[i] - tm);
    sts += (tt[i] - tm) * (s[i] - sm);
  }
  const double amp = -sts / stt;
  if (!(amp > 0.0)) throw Error("fit_blowup_rate: sqrt(lambda|log lambda|) is not decreasing");
  RateFit out;
  out.T_plus = tm + sm / amp;
  if (!(out.T_plus > tt.back())) throw Error("fit_blowup_rate: fitted T_plus precedes the window");
  out.C = amp * amp;
  double sse = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    const double e = s[i] - amp * (out.T_plus - tt[i]);
    sse += e * e;
  }
  out.rms_residual = std::sqrt(sse / n);
  out.t_lo = tt.front();
  out.t_hi = tt.back();
  out.points = tt.size();
  return out;
}

RateFit fit_blowup_rate(const ModulationTrack& track, double t_lo, double t_hi) {
  std::vector<double> t;
  std::vector<double> l;
  for (const auto& row : track.rows()) {
    if (row.converged && row.t >= t_lo && row.t <= t_hi) {
      t.push_back(row.t);
      l.push_back(row.lambda);
    }
  }
  return fit_blowup_rate(t, l);
}

}  // namespace wmlab

#include "dpoly/disorder.hpp"

#include <cmath>
#include <stdexcept>

#include "dpoly/walk_kernel.hpp"

namespace dpoly {

double DisorderLaw::lambda(double beta) const {
  switch (kind) {
    case DisorderKind::gaussian:
      return 0.5 * beta * beta;
    case DisorderKind::rademacher:
      // log cosh, overflow-safe
      return std::fabs(beta) + std::log1p(std::exp(-2.0 * std::fabs(beta))) - M_LN2;
  }
  return 0.0;
}

DisorderLaw disorder_law(const std::string& name) {
  if (name == "gaussian") return {DisorderKind::gaussian};
  if (name == "rademacher") return {DisorderKind::rademacher};
  throw std::invalid_argument("unknown disorder law: " + name);
}

TemperatureSchedule solve_beta_with_overlap(double beta_hat, long N, double R_N, DisorderLaw law) {
  if (beta_hat < 0.0 || beta_hat >= 1.0)
    throw std::invalid_argument("solve_beta: beta_hat must lie in [0,1)");
  TemperatureSchedule ts;
  ts.beta_hat = beta_hat;
  ts.N = N;
  ts.R_N = R_N;
  ts.sigma2 = beta_hat * beta_hat / R_N;
  ts.law = law;
  if (beta_hat == 0.0) {
    ts.beta_N = 0.0;
    return ts;
  }
  if (law.kind == DisorderKind::gaussian) {
    ts.beta_N = std::sqrt(std::log1p(ts.sigma2));
    return ts;
  }
  // residual(b) = e^{lambda(2b) - 2 lambda(b)} - 1 - sigma2, increasing in b
  auto residual = [&](double b) {
    return std::expm1(law.lambda(2.0 * b) - 2.0 * law.lambda(b)) - ts.sigma2;
  };
  double lo = 0.0, hi = 10.0;
  if (residual(hi) < 0.0)
    throw std::runtime_error("solve_beta: root not bracketed in (0, 10)");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) < 0.0) lo = mid;
    else hi = mid;
    if (hi - lo < 1e-15) break;
  }
  ts.beta_N = 0.5 * (lo + hi);
  if (std::fabs(residual(ts.beta_N)) > 1e-12)
    throw std::runtime_error("solve_beta: residual above 1e-12");
  return ts;
}

TemperatureSchedule solve_beta(double beta_hat, long N, DisorderLaw law) {
  if (N < 1) throw std::invalid_argument("solve_beta: N must be >= 1");
  return solve_beta_with_overlap(beta_hat, N, overlap_value(N), law);
}

}  // namespace dpoly

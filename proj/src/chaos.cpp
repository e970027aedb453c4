#include "dpoly/chaos.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "dpoly/walk_kernel.hpp"

namespace dpoly {

double xi_value(const DisorderField& env, double beta, long n, const LatticePoint& z) {
  return std::expm1(beta * env.omega(n, z) - env.law().lambda(beta));
}

double xi_variance(const DisorderLaw& law, double beta) {
  return std::expm1(law.lambda(2.0 * beta) - 2.0 * law.lambda(beta));
}

double xi_moment(const DisorderLaw& law, double beta, int m) {
  if (m < 1) throw std::invalid_argument("xi_moment: m must be >= 1");
  const double lam = law.lambda(beta);
  if (law.kind == DisorderKind::gaussian) {
    // E[(e^{beta w - lam} - 1)^m] = sum_j C(m,j) (-1)^{m-j} e^{beta^2 j(j-1)/2}
    double acc = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= m; ++j) {
      const double term = binom * std::exp(0.5 * beta * beta * double(j) * double(j - 1));
      acc += ((m - j) % 2 == 0) ? term : -term;
      binom *= double(m - j) / double(j + 1);
    }
    return acc;
  }
  const double xp = std::expm1(beta - lam), xm = std::expm1(-beta - lam);
  return 0.5 * (std::pow(xp, m) + std::pow(xm, m));
}

namespace {

// adaptive Simpson, absolute tolerance
double simpson_abs(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth > 48 || std::fabs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_abs(f, a, m, fa, flm, fm, 0.5 * tol, depth + 1) +
         simpson_abs(f, m, b, fm, frm, fb, 0.5 * tol, depth + 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
  return simpson_abs(f, a, b, fa, fm, fb, tol, 0);
}

}  // namespace

double xi_abs_moment(const DisorderLaw& law, double beta, int m) {
  if (m < 1) throw std::invalid_argument("xi_abs_moment: m must be >= 1");
  if (m % 2 == 0) return xi_moment(law, beta, m);
  const double lam = law.lambda(beta);
  if (law.kind == DisorderKind::rademacher) {
    const double xp = std::expm1(beta - lam), xm = std::expm1(-beta - lam);
    return 0.5 * (std::pow(std::fabs(xp), m) + std::pow(std::fabs(xm), m));
  }
  if (beta == 0.0) return 0.0;
  // |e^{beta w - lam} - 1|^m against the normal density; kink at w0
  const double w0 = lam / beta;
  auto f = [&](double w) {
    const double xi = std::expm1(beta * w - lam);
    return std::pow(std::fabs(xi), m) * std::exp(-0.5 * w * w) / std::sqrt(2.0 * M_PI);
  };
  const double lo = std::min(w0, -14.0), hi = std::max(w0, 14.0);
  return integrate(f, lo, w0, 1e-14) + integrate(f, w0, hi, 1e-14);
}

double mixed_moment(const SetPartition& I, const DisorderLaw& law, double beta) {
  double acc = 1.0;
  for (const auto& b : I.blocks)
    if (b.size() >= 2) acc *= xi_moment(law, beta, int(b.size()));
  return acc;
}

double mixed_abs_moment(const SetPartition& I, const DisorderLaw& law, double beta) {
  double acc = 1.0;
  for (const auto& b : I.blocks)
    if (b.size() >= 2) acc *= xi_abs_moment(law, beta, int(b.size()));
  return acc;
}

namespace {

// depth-first sum over strictly increasing interior times and compatible
// space points; term count stays small because every q factor must be
// reachable (nonzero kernel entries only)
struct ExpandState {
  const DisorderField* env;
  double beta;
  long b;
  LatticePoint y;
  int k_max;
  std::vector<double> by_order;  // [k], k >= 1

  void rec(long n_prev, const LatticePoint& z_prev, double weight, int order) {
    if (order >= 1) {
      const double closing = q_point(b - n_prev, y - z_prev);
      if (closing != 0.0) by_order[std::size_t(order)] += weight * closing;
    }
    if (order == k_max) return;
    for (long n = n_prev + 1; n <= b - 1; ++n) {
      const long dt = n - n_prev;
      const long rem = b - n;
      for (long dx1 = -dt; dx1 <= dt; ++dx1) {
        for (long dx2 = -(dt - std::labs(dx1)); dx2 <= dt - std::labs(dx1); ++dx2) {
          const LatticePoint z{z_prev.x1 + int(dx1), z_prev.x2 + int(dx2)};
          if ((y - z).l1() > rem) continue;
          const double q = q_point(dt, LatticePoint{int(dx1), int(dx2)});
          if (q == 0.0) continue;
          const double xi = xi_value(*env, beta, n, z);
          rec(n, z, weight * q * xi, order + 1);
        }
      }
    }
  }
};

}  // namespace

std::vector<double> expand_orders(const DisorderField& env, double beta, long a, long b,
                                  const LatticePoint& x, const LatticePoint& y) {
  if (a >= b) throw std::invalid_argument("expand: need a < b");
  if (b - a - 1 > 6) throw std::invalid_argument("expand: full expansion capped at b-a-1 <= 6");
  const int k_max = int(b - a - 1);
  ExpandState st{&env, beta, b, y, k_max, std::vector<double>(std::size_t(k_max) + 1, 0.0)};
  st.by_order[0] = q_point(b - a, y - x);
  if (k_max > 0) st.rec(a, x, 1.0, 0);
  return st.by_order;
}

double expand(const DisorderField& env, double beta, long a, long b, const LatticePoint& x,
              const LatticePoint& y, int k_max) {
  if (a >= b) throw std::invalid_argument("expand: need a < b");
  if (b - a - 1 > 6) throw std::invalid_argument("expand: full expansion capped at b-a-1 <= 6");
  if (k_max < 0) k_max = int(b - a - 1);
  const std::vector<double> ord = expand_orders(env, beta, a, b, x, y);
  double sum = 0.0;
  for (std::size_t k = 0; k < ord.size() && int(k) <= k_max; ++k) sum += ord[k];
  return sum;
}

std::vector<double> expand_centred_averaged_orders(const DisorderField& env, double beta, long N,
                                                   const TestFunction& phi,
                                                   const TestFunction& psi) {
  if (N > 6) throw std::invalid_argument("expand_centred_averaged: capped at N <= 6");
  const int k_max = int(N - 1);
  const double rt = std::sqrt(double(N));
  const int w = phi.is_delta() ? 0 : int(std::ceil(phi.support_radius() * rt));
  // sum over the first chaos point (n1, z1) against the phi boundary kernel,
  // then recurse over the later points; each order closes with psi
  struct Rec {
    const DisorderField* env;
    double beta;
    long N;
    const TestFunction* psi;
    double rt;
    int k_max;
    std::vector<double> by_order;

    // psi-boundary: q^N_{n,N}(z, psi) = sum_y q_{N-n}(y-z) psi(y/sqrt N)
    double close(long n, const LatticePoint& z) const {
      const long dt = N - n;
      double acc = 0.0;
      for (long d1 = -dt; d1 <= dt; ++d1)
        for (long d2 = -(dt - std::labs(d1)); d2 <= dt - std::labs(d1); ++d2) {
          const double q = q_point(dt, LatticePoint{int(d1), int(d2)});
          if (q == 0.0) continue;
          acc += q * (*psi)(double(z.x1 + d1) / rt, double(z.x2 + d2) / rt);
        }
      return acc;
    }

    void rec(long n_prev, const LatticePoint& z_prev, double weight, int order) {
      by_order[std::size_t(order)] += weight * close(n_prev, z_prev);
      if (order == k_max) return;
      for (long n = n_prev + 1; n <= N - 1; ++n) {
        const long dt = n - n_prev;
        for (long d1 = -dt; d1 <= dt; ++d1)
          for (long d2 = -(dt - std::labs(d1)); d2 <= dt - std::labs(d1); ++d2) {
            const LatticePoint z{z_prev.x1 + int(d1), z_prev.x2 + int(d2)};
            const double q = q_point(dt, LatticePoint{int(d1), int(d2)});
            if (q == 0.0) continue;
            rec(n, z, weight * q * xi_value(*env, beta, n, z), order + 1);
          }
      }
    }
  } rec{&env, beta, N, &psi, rt, k_max, std::vector<double>(std::size_t(k_max) + 1, 0.0)};

  if (k_max >= 1) {
    for (long n1 = 1; n1 <= N - 1; ++n1) {
      // z1 ranges over points reachable from supp(phi_N) in n1 steps
      for (long z1a = -w - n1; z1a <= w + n1; ++z1a)
        for (long z1b = -w - n1; z1b <= w + n1; ++z1b) {
          const LatticePoint z1{int(z1a), int(z1b)};
          double boundary = 0.0;
          if (phi.is_delta()) {
            boundary = double(N) * q_point(n1, z1);
          } else {
            for (long x1 = -w; x1 <= w; ++x1)
              for (long x2 = -w; x2 <= w; ++x2) {
                const double pv = phi(double(x1) / rt, double(x2) / rt);
                if (pv == 0.0) continue;
                boundary += pv * q_point(n1, z1 - LatticePoint{int(x1), int(x2)});
              }
          }
          if (boundary == 0.0) continue;
          rec.rec(n1, z1, boundary * xi_value(env, beta, n1, z1), 1);
        }
    }
  }
  for (double& v : rec.by_order) v /= double(N);
  return rec.by_order;
}

double expand_centred_averaged(const DisorderField& env, double beta, long N,
                               const TestFunction& phi, const TestFunction& psi, int k_max) {
  if (k_max < 0) k_max = int(N - 1);
  const std::vector<double> ord = expand_centred_averaged_orders(env, beta, N, phi, psi);
  double sum = 0.0;
  for (std::size_t k = 1; k < ord.size() && int(k) <= k_max; ++k) sum += ord[k];
  return sum;
}

}  // namespace dpoly

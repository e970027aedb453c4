#include "dpoly/walk_kernel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dpoly {

double overlap_alpha() { return kEulerGamma + std::log(16.0) - M_PI; }

double walk1d_prob(long n, long k) {
  if (k < -n || k > n || ((n + k) & 1L)) return 0.0;
  if (n == 0) return 1.0;
  const double m = 0.5 * double(n + k);
  return std::exp(std::lgamma(double(n) + 1.0) - std::lgamma(m + 1.0) -
                  std::lgamma(double(n) - m + 1.0) - double(n) * M_LN2);
}

double q_point(long n, const LatticePoint& x) {
  return walk1d_prob(n, long(x.x1) + x.x2) * walk1d_prob(n, long(x.x1) - x.x2);
}

KernelTable kernel(long n, int window) {
  if (n < 0) throw std::invalid_argument("kernel: n must be >= 0");
  const int w = window < 0 ? int(n) : window;
  KernelTable t;
  t.n = n;
  t.window = w;
  t.values.setZero(2 * w + 1, 2 * w + 1);
  if (n == 0) {
    t.values(w, w) = 1.0;
    return t;
  }
  // one row of the 1d law, indexed by k + n
  std::vector<double> p(2 * n + 1, 0.0);
  for (long k = -n; k <= n; k += 2) p[k + n] = walk1d_prob(n, k);
  for (int i = -w; i <= w; ++i) {
    for (int j = -w; j <= w; ++j) {
      const long u = long(i) + j, v = long(i) - j;
      if (u < -n || u > n || v < -n || v > n || ((u + n) & 1L)) continue;
      t.values(i + w, j + w) = p[u + n] * p[v + n];
    }
  }
  return t;
}

CountTable kernel_counts_by_convolution(long n) {
  if (n < 0 || n > 31) throw std::invalid_argument("kernel_counts_by_convolution: need 0 <= n <= 31");
  const int w = int(n);
  CountTable t;
  t.n = n;
  t.window = w;
  t.values.setZero(2 * w + 1, 2 * w + 1);
  t.values(w, w) = 1;
  Eigen::Array<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> next(2 * w + 1, 2 * w + 1);
  for (long step = 1; step <= n; ++step) {
    next.setZero();
    for (int i = 0; i < 2 * w + 1; ++i)
      for (int j = 0; j < 2 * w + 1; ++j) {
        const std::int64_t c = t.values(i, j);
        if (!c) continue;
        if (i + 1 <= 2 * w) next(i + 1, j) += c;
        if (i - 1 >= 0) next(i - 1, j) += c;
        if (j + 1 <= 2 * w) next(i, j + 1) += c;
        if (j - 1 >= 0) next(i, j - 1) += c;
      }
    t.values.swap(next);
  }
  return t;
}

double return_prob(long n) {
  if (n < 1) throw std::invalid_argument("return_prob: n must be >= 1");
  const double log_c = std::lgamma(2.0 * double(n) + 1.0) - 2.0 * std::lgamma(double(n) + 1.0) -
                       2.0 * double(n) * M_LN2;
  return std::exp(2.0 * log_c);
}

OverlapSum overlap(long N) {
  if (N < 1) throw std::invalid_argument("overlap: N must be >= 1");
  OverlapSum r;
  r.N = N;
  r.per_term.resize(std::size_t(N));
  // q_{2(n+1)}(0) / q_{2n}(0) = ((2n+1)/(2n+2))^2, started from q_2(0) = 1/4
  double term = 0.25;
  double sum = 0.0, comp = 0.0;
  for (long n = 1; n <= N; ++n) {
    r.per_term[std::size_t(n - 1)] = term;
    const double y = term - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
    const double ratio = (2.0 * double(n) + 1.0) / (2.0 * double(n) + 2.0);
    term *= ratio * ratio;
  }
  r.value = sum;
  return r;
}

double overlap_value(long N) {
  if (N < 1) throw std::invalid_argument("overlap: N must be >= 1");
  double term = 0.25, sum = 0.0, comp = 0.0;
  for (long n = 1; n <= N; ++n) {
    const double y = term - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
    const double ratio = (2.0 * double(n) + 1.0) / (2.0 * double(n) + 2.0);
    term *= ratio * ratio;
  }
  return sum;
}

double heat_kernel(double t, double x1, double x2) {
  if (t <= 0.0) throw std::domain_error("heat_kernel: t must be > 0");
  return std::exp(-(x1 * x1 + x2 * x2) / (2.0 * t)) / (2.0 * M_PI * t);
}

double local_clt_gap(long n) {
  const long r = long(std::sqrt(double(n)));
  std::vector<double> p(2 * n + 1, 0.0);
  for (long k = -n; k <= n; k += 2) p[k + n] = walk1d_prob(n, k);
  double gap = 0.0;
  for (long i = -r; i <= r; ++i) {
    for (long j = -r; j <= r; ++j) {
      if (((i + j + n) & 1L)) continue;
      if (double(i) * i + double(j) * j > double(n)) continue;
      const long u = i + j, v = i - j;
      const double q = p[u + n] * p[v + n];
      const double g = heat_kernel(0.5 * double(n), double(i), double(j));
      gap = std::max(gap, std::fabs(q - 2.0 * g));
    }
  }
  return gap;
}

std::string kernel_to_csv(const KernelTable& t) {
  std::string out = "n,x1,x2,q\n";
  char buf[96];
  for (int i = -t.window; i <= t.window; ++i)
    for (int j = -t.window; j <= t.window; ++j) {
      const double q = t.values(i + t.window, j + t.window);
      if (q == 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%.17g\n", t.n, i, j, q);
      out += buf;
    }
  return out;
}

}  // namespace dpoly

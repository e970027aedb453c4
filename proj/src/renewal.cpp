#include "dpoly/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dpoly/parallel.hpp"
#include "dpoly/rng.hpp"
#include "dpoly/walk_kernel.hpp"

namespace dpoly {

double IncrementLaw::mass(long t, const LatticePoint& x) const {
  if (t < 1 || t > N) return 0.0;
  const double q = q_point(t, x);
  return q * q / R_N;
}

double IncrementLaw::total_mass() const {
  double s = 0.0;
  for (double p : time_marginal) s += p;
  return s;
}

IncrementLaw increment_law(long N) {
  if (N < 1) throw std::invalid_argument("increment_law: N must be >= 1");
  IncrementLaw law;
  law.N = N;
  const OverlapSum r = overlap(N);
  law.R_N = r.value;
  law.time_marginal.resize(std::size_t(N));
  for (long t = 1; t <= N; ++t) law.time_marginal[std::size_t(t - 1)] = r.per_term[std::size_t(t - 1)] / r.value;
  return law;
}

std::vector<double> U_line(long N, double beta_hat, long n_max) {
  if (N < 1) throw std::invalid_argument("U_line: N must be >= 1");
  if (n_max < 0) n_max = N;
  const OverlapSum r = overlap(N);
  const double w = beta_hat * beta_hat / r.value;  // bh^2 P(t) = w q_{2t}(0)
  std::vector<double> u(std::size_t(n_max) + 1, 0.0);
  u[0] = 1.0;
  for (long n = 1; n <= n_max; ++n) {
    double acc = 0.0;
    const long t_hi = std::min(n, N);
    for (long t = 1; t <= t_hi; ++t) acc += r.per_term[std::size_t(t - 1)] * u[std::size_t(n - t)];
    u[std::size_t(n)] = w * acc;
  }
  return u;
}

double second_moment_exact(const std::vector<double>& u_line, long M) {
  if (M < 1 || std::size_t(M) > u_line.size())
    throw std::invalid_argument("second_moment_exact: M out of range");
  double s = 0.0;
  for (long n = 0; n < M; ++n) s += u_line[std::size_t(n)];
  return s;
}

int ReplicaWeightFunction::window(long n) const {
  return box_cap < 0 ? int(n) : int(std::min(n, long(box_cap)));
}

double ReplicaWeightFunction::at(long n, const LatticePoint& x) const {
  if (n < 0 || n > n_max) return 0.0;
  const int w = window(n);
  if (std::abs(x.x1) > w || std::abs(x.x2) > w) return 0.0;
  return tables[std::size_t(n)](x.x1 + w, x.x2 + w);
}

ReplicaWeightFunction u_tables(long N, long n_max, double beta_hat, int box_cap) {
  if (N < 1) throw std::invalid_argument("u_tables: N must be >= 1");
  if (n_max < 0) n_max = N;
  ReplicaWeightFunction u;
  u.N = N;
  u.beta_hat = beta_hat;
  u.n_max = n_max;
  u.box_cap = box_cap;
  u.tables.resize(std::size_t(n_max) + 1);
  u.line.assign(std::size_t(n_max) + 1, 0.0);

  const double R_N = overlap_value(N);
  const double bh2 = beta_hat * beta_hat;

  // squared-kernel increments on their own windows
  std::vector<KernelTable> incr(std::size_t(std::min(n_max, N)) + 1);
  for (long t = 1; t <= std::min(n_max, N); ++t) {
    KernelTable k = kernel(t);
    k.values = (k.values * k.values) / R_N;
    incr[std::size_t(t)] = std::move(k);
  }

  for (long n = 0; n <= n_max; ++n) {
    const int w = u.window(n);
    Eigen::ArrayXXd table = Eigen::ArrayXXd::Zero(2 * w + 1, 2 * w + 1);
    if (n == 0) {
      table(w, w) = 1.0;
    } else {
      // u(n,.) = bh^2 sum_{t} incr(t,.) * u(n-t,.)   (spatial convolution)
      const long t_hi = std::min(n, N);
      for (long t = 1; t <= t_hi; ++t) {
        const KernelTable& inc = incr[std::size_t(t)];
        const Eigen::ArrayXXd& prev = u.tables[std::size_t(n - t)];
        const int wp = u.window(n - t);
        const int wi = inc.window;
        for (int a = -wi; a <= wi; ++a) {
          for (int b = -wi; b <= wi; ++b) {
            const double m = inc.values(a + wi, b + wi);
            if (m == 0.0) continue;
            // target x = increment + previous point
            const int lo1 = std::max(-w - a, -wp), hi1 = std::min(w - a, wp);
            for (int p1 = lo1; p1 <= hi1; ++p1)
              for (int p2 = std::max(-w - b, -wp); p2 <= std::min(w - b, wp); ++p2) {
                const double v = prev(p1 + wp, p2 + wp);
                if (v != 0.0) table(p1 + a + w, p2 + b + w) += m * v;
              }
          }
        }
      }
      table *= bh2;
    }
    u.line[std::size_t(n)] = table.sum();
    u.tables[std::size_t(n)] = std::move(table);
  }
  return u;
}

double U_point(long N, long n, const LatticePoint& x, double beta_hat) {
  if (n < 0 || n > N) throw std::invalid_argument("U_point: need 0 <= n <= N");
  const ReplicaWeightFunction u = u_tables(N, n, beta_hat);
  return u.at(n, x);
}

RenewalSampleEstimate sample_renewal(long N, double beta_hat, std::uint64_t seed,
                                     std::size_t replicas, long n_max, int workers) {
  if (n_max < 0) n_max = N;
  const IncrementLaw law = increment_law(N);
  std::vector<double> cum(law.time_marginal.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cum.size(); ++i) {
    acc += law.time_marginal[i];
    cum[i] = acc;
  }
  const double bh2 = beta_hat * beta_hat;

  // per-replica occupation of tau_k, weighted by beta_hat^{2k}
  std::vector<std::vector<double>> occ(replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    std::vector<double>& o = occ[r];
    o.assign(std::size_t(n_max) + 1, 0.0);
    o[0] = 1.0;  // k = 0 atom
    if (beta_hat == 0.0) return;
    CounterStream rs(mix64(seed, 0x72656e6577ULL, r));
    long tau = 0;
    double wk = 1.0;
    while (true) {
      const double x = rs.next_unit() * acc;
      const std::size_t t =
          std::size_t(std::lower_bound(cum.begin(), cum.end(), x) - cum.begin()) + 1;
      tau += long(t);
      if (tau > n_max) break;
      wk *= bh2;
      o[std::size_t(tau)] += wk;
      if (wk < 1e-300) break;
    }
  });

  RenewalSampleEstimate est;
  est.mean.assign(std::size_t(n_max) + 1, 0.0);
  est.half_width.assign(std::size_t(n_max) + 1, 0.0);
  const double z = normal_quantile(0.995);
  const double m = double(replicas);
  std::vector<double> sq(std::size_t(n_max) + 1, 0.0);
  std::vector<double> tot(replicas, 0.0);
  for (std::size_t r = 0; r < replicas; ++r) {
    for (std::size_t n = 0; n < occ[r].size(); ++n) {
      est.mean[n] += occ[r][n];
      sq[n] += occ[r][n] * occ[r][n] / m;
      tot[r] += occ[r][n];
    }
  }
  for (double& v : est.mean) v /= m;
  for (std::size_t n = 0; n <= std::size_t(n_max); ++n) {
    const double var = std::max(0.0, sq[n] - est.mean[n] * est.mean[n]);
    est.half_width[n] = z * std::sqrt(var / m);
  }
  double tm = 0.0, tv = 0.0;
  for (double t : tot) tm += t / m;
  for (double t : tot) tv += (t - tm) * (t - tm) / m;
  est.checksum_mean = tm;
  est.checksum_half_width = z * std::sqrt(tv / m);
  return est;
}

std::string u_line_csv(long N, double beta_hat, const std::vector<double>& u) {
  std::string out = "N,beta_hat,n,U_n\n";
  char buf[96];
  for (std::size_t n = 0; n < u.size(); ++n) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%zu,%.17g\n", N, beta_hat, n, u[n]);
    out += buf;
  }
  return out;
}

}  // namespace dpoly

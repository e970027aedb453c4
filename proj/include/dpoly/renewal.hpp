#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "dpoly/lattice.hpp"
#include "dpoly/stats.hpp"

namespace dpoly {

// Renewal representation of the second moment: i.i.d. increments with law
// P((t,x)) = q_t(x)^2 / R_N (t <= N), and
//   U_N(n, x) = sum_k beta_hat^{2k} P(tau_k = n, S_k = x),
//   sum_{n=0}^{N} U_N(n) = E[(Z_{N+1})^2].

struct IncrementLaw {
  long N = 0;
  double R_N = 0.0;
  std::vector<double> time_marginal;  // [t-1] = q_{2t}(0) / R_N, t = 1..N

  /// P((t, x)) = q_t(x)^2 / R_N for 1 <= t <= N, else 0.
  double mass(long t, const LatticePoint& x) const;
  double total_mass() const;
};

IncrementLaw increment_law(long N);

/// U_N(n) for n = 0..n_max by the renewal equation
///   u(n) = 1{n=0} + bh^2 sum_{t<=min(n,N)} P(t) u(n-t).   O(n_max^2).
std::vector<double> U_line(long N, double beta_hat, long n_max = -1);

/// E[(Z_M^{beta_N})^2] = sum_{n=0}^{M-1} U_N(n), for M <= N+1.
double second_moment_exact(const std::vector<double>& u_line, long M);

/// Exact spatial tables U_N(n, .) for n = 0..n_max on windows |x|_inf <= n
/// (optionally capped); one increment-law convolution per epoch, geometric
/// beta_hat weights summed in place.
struct ReplicaWeightFunction {
  long N = 0;
  double beta_hat = 0.0;
  long n_max = 0;
  int box_cap = -1;
  std::vector<Eigen::ArrayXXd> tables;  // tables[n]: window radius min(n, cap)
  std::vector<double> line;             // U_N(n) = sum_x U_N(n, x)

  double at(long n, const LatticePoint& x) const;
  int window(long n) const;
};

ReplicaWeightFunction u_tables(long N, long n_max, double beta_hat, int box_cap = -1);

double U_point(long N, long n, const LatticePoint& x, double beta_hat);

/// Importance-sampled estimate of U_N(n), n = 0..n_max, from `replicas`
/// renewal trajectories weighted by beta_hat^{2k}.
struct RenewalSampleEstimate {
  std::vector<double> mean;        // estimate of U_N(n)
  std::vector<double> half_width;  // 99% per-n half-widths
  double checksum_mean = 0.0;      // estimate of sum_n U_N(n)
  double checksum_half_width = 0.0;
};

RenewalSampleEstimate sample_renewal(long N, double beta_hat, std::uint64_t seed,
                                     std::size_t replicas, long n_max = -1, int workers = 0);

std::string u_line_csv(long N, double beta_hat, const std::vector<double>& u);

}  // namespace dpoly

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "dpoly/lattice.hpp"

namespace dpoly {

// Transition kernels of the 2d simple random walk. Rotating by 45 degrees,
// (u,v) = (x1+x2, x1-x2) performs two independent 1d simple walks, so
//   q_n(x) = p_n(x1+x2) * p_n(x1-x2),   p_n(k) = C(n,(n+k)/2) / 2^n,
// which is exact and O(n^2) per table. Iterated convolution of q_1 is kept
// as a cross-check oracle (exact integer path counts for small n).

/// Euler-Mascheroni constant.
inline constexpr double kEulerGamma = 0.57721566490153286061;

/// alpha = gamma + log 16 - pi from the R_N asymptotic, ~0.208.
double overlap_alpha();

/// 1d simple-walk probability p_n(k), log-space binomial (0 off parity/range).
double walk1d_prob(long n, long k);

/// q_n(x) evaluated pointwise; exact up to double rounding, any n >= 0.
double q_point(long n, const LatticePoint& x);

/// Dense kernel table on the centred window |x1|,|x2| <= window.
template <typename Scalar>
struct KernelTableT {
  long n = 0;
  int window = 0;
  // values(i, j) = q_n((i - window, j - window))
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> values;

  Scalar operator()(const LatticePoint& x) const {
    if (std::abs(x.x1) > window || std::abs(x.x2) > window) return Scalar(0);
    return values(x.x1 + window, x.x2 + window);
  }
  Scalar sum() const { return values.sum(); }
};

using KernelTable = KernelTableT<double>;
using CountTable = KernelTableT<std::int64_t>;  // path counts, q_n = counts / 4^n

/// Exact kernel table; window < 0 means the full support window n.
KernelTable kernel(long n, int window = -1);

/// Integer path-count table built by n-fold convolution of the one-step law.
/// Exact for n <= 31 (counts fit in int64); the rational oracle for kernel().
CountTable kernel_counts_by_convolution(long n);

/// Return probability q_{2n}(0) = (C(2n,n)/4^n)^2, n >= 1.
double return_prob(long n);

/// R_N = sum_{n=1}^N q_{2n}(0) with all partial terms retained.
struct OverlapSum {
  long N = 0;
  double value = 0.0;
  std::vector<double> per_term;  // per_term[n-1] = q_{2n}(0)
};

OverlapSum overlap(long N);

/// R_N alone (no term storage), for large-N callers.
double overlap_value(long N);

/// 2d heat kernel g_t(x) = exp(-|x|^2 / 2t) / (2 pi t); rejects t <= 0.
double heat_kernel(double t, double x1, double x2);

/// max over even-parity |x| <= sqrt(n) of |q_n(x) - 2 g_{n/2}(x)|.
double local_clt_gap(long n);

/// CSV rows (n, x1, x2, q) for plotting.
std::string kernel_to_csv(const KernelTable& table);

}  // namespace dpoly

#pragma once

#include <vector>

#include "dpoly/disorder.hpp"
#include "dpoly/lattice.hpp"
#include "dpoly/partitions.hpp"
#include "dpoly/polymer.hpp"

namespace dpoly {

// Multilinear (chaos) expansion of the partition function in the centred
// variables xi(n,z) = e^{beta omega(n,z) - lambda(beta)} - 1. The expansion
// terminates at order b-a-1 (one xi per interior time slice at most), where
// it reproduces the transfer matrix exactly.

/// xi(n, z) for a given environment.
double xi_value(const DisorderField& env, double beta, long n, const LatticePoint& z);

/// sigma^2 = E[xi^2] = e^{lambda(2 beta) - 2 lambda(beta)} - 1.
double xi_variance(const DisorderLaw& law, double beta);

/// Exact E[xi^m]; gaussian in closed form, rademacher by two-point sum.
double xi_moment(const DisorderLaw& law, double beta, int m);

/// Exact E[|xi|^m]; even gaussian moments in closed form, odd by quadrature.
double xi_abs_moment(const DisorderLaw& law, double beta, int m);

/// Mixed moment E[xi^I] = prod over blocks of size >= 2 of E[xi^{|block|}].
double mixed_moment(const SetPartition& I, const DisorderLaw& law, double beta);
double mixed_abs_moment(const SetPartition& I, const DisorderLaw& law, double beta);

/// Partial sums of the point-to-point chaos expansion up to order k_max.
/// Exact equality with point_to_point at k_max = b-a-1. Refuses b-a-1 > 6.
double expand(const DisorderField& env, double beta, long a, long b, const LatticePoint& x,
              const LatticePoint& y, int k_max);

/// Per-order contributions, index k = 0..b-a-1 (order 0 is q_{a,b}).
std::vector<double> expand_orders(const DisorderField& env, double beta, long a, long b,
                                  const LatticePoint& x, const LatticePoint& y);

/// Partial sums of the centred averaged expansion (drops the k = 0 term);
/// equals averaged(...) - q^N(phi,psi) at full order. N <= 6.
double expand_centred_averaged(const DisorderField& env, double beta, long N,
                               const TestFunction& phi, const TestFunction& psi, int k_max);

/// Per-order contributions of the centred averaged expansion, index k >= 1.
std::vector<double> expand_centred_averaged_orders(const DisorderField& env, double beta, long N,
                                                   const TestFunction& phi,
                                                   const TestFunction& psi);

}  // namespace dpoly

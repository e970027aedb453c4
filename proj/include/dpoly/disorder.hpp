#pragma once

#include <cstdint>
#include <string>

#include "dpoly/lattice.hpp"
#include "dpoly/rng.hpp"

namespace dpoly {

enum class DisorderKind { gaussian, rademacher };

/// Mean-zero, unit-variance disorder law with cumulant lambda(beta).
struct DisorderLaw {
  DisorderKind kind = DisorderKind::gaussian;

  double lambda(double beta) const;

  std::string name() const { return kind == DisorderKind::gaussian ? "gaussian" : "rademacher"; }
};

DisorderLaw disorder_law(const std::string& name);

/// i.i.d. field omega(n, z), sampled lazily from hash(seed, replica, n, z).
/// Never materialized; the same (seed, replica) reproduces the same field in
/// every module.
class DisorderField {
 public:
  DisorderField(DisorderLaw law, std::uint64_t seed, std::uint64_t replica)
      : law_(law), key_(mix64(seed, 0x6f6d656761ULL, replica)) {}

  /// Keyed in two stages so sweeps can hoist the (n, x1+x2) part per row.
  std::uint64_t row_key(long n, long u) const {
    return mix64(key_, std::uint64_t(n), std::uint64_t(u));
  }

  /// Raw site bits; omega() below is a fixed function of these, so the lazy
  /// field and the vectorized sweeps read identical disorder.
  std::uint64_t site_bits(long n, const LatticePoint& z) const {
    return mix64(row_key(n, long(z.x1) + z.x2), std::uint64_t(long(z.x1) - z.x2));
  }

  double omega(long n, const LatticePoint& z) const {
    const std::uint64_t u = site_bits(n, z);
    if (law_.kind == DisorderKind::gaussian) return normal_icdf(u64_to_unit(u));
    return (u >> 63) ? 1.0 : -1.0;
  }

  const DisorderLaw& law() const { return law_; }

 private:
  DisorderLaw law_;
  std::uint64_t key_;
};

/// Calibrated inverse temperature: sigma^2 = e^{lambda(2b) - 2 lambda(b)} - 1
/// = beta_hat^2 / R_N.
struct TemperatureSchedule {
  double beta_hat = 0.0;
  long N = 0;
  double R_N = 0.0;
  double sigma2 = 0.0;  // beta_hat^2 / R_N
  double beta_N = 0.0;
  DisorderLaw law;
};

/// Gaussian case in closed form; otherwise bracketed root-finding to 1e-12.
TemperatureSchedule solve_beta(double beta_hat, long N, DisorderLaw law = {});

/// Same calibration for a caller-supplied R_N (avoids recomputing overlaps).
TemperatureSchedule solve_beta_with_overlap(double beta_hat, long N, double R_N,
                                            DisorderLaw law = {});

}  // namespace dpoly

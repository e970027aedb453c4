#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "dpoly/disorder.hpp"
#include "dpoly/lattice.hpp"
#include "dpoly/stats.hpp"

namespace dpoly {

// Partition functions of the 2d directed polymer. Small horizons go through
// a literal transfer matrix in lattice coordinates (the oracle path); large
// horizons use the same dynamic program in 45-degree-rotated coordinates,
// where the reachable set packs into a dense parity grid, truncated to a box
// of radius box_factor * sqrt(N) with the discarded kernel mass reported.

/// Test functions on R^2 for the averaged field.
struct TestFunction {
  enum class Kind { gaussian_bump, box, delta0, one };
  Kind kind = Kind::one;
  double param = 1.0;         // s for gaussian_bump, half-side r for box
  double trunc_radius = 0.0;  // macroscopic support cut (gaussian_bump)
  double amplitude = 1.0;

  double operator()(double X1, double X2) const;
  TestFunction scaled(double factor) const {
    TestFunction f = *this;
    f.amplitude *= factor;
    return f;
  }
  bool is_delta() const { return kind == Kind::delta0; }
  /// Radius beyond which the function is treated as zero (inf for `one`).
  double support_radius() const;
};

TestFunction phi_gaussian_bump(double s, double mass_tol = 1e-5);
TestFunction phi_box(double half_side);
TestFunction phi_delta();
TestFunction psi_one();

// ---- exact small-horizon transfer matrix (oracle path) ----

/// Z_{a,b}(x, y): disorder weights at interior times a+1..b-1 only.
/// window: sweep box radius around x (default exact, radius b-a).
double point_to_point(const DisorderField& env, double beta, long a, long b,
                      const LatticePoint& x, const LatticePoint& y, int window = -1);

/// Z_N(x) = sum_y Z_{0,N}(x, y); exact (window N) unless window given.
double point_to_line_exact(const DisorderField& env, double beta, long N,
                           const LatticePoint& x = {}, int window = -1);

/// (1/N) sum_{x,y} phi(x/sqrt N) Z_{0,N}(x,y) psi(y/sqrt N), exact sweep.
double averaged_exact(const DisorderField& env, double beta, long N, const TestFunction& phi,
                      const TestFunction& psi);

/// Mean q^N(phi, psi) of the averaged partition function (beta = 0 sweep).
double averaged_mean(long N, const TestFunction& phi, const TestFunction& psi);

// ---- production sweep ----

struct SweepOptions {
  double box_factor = 4.0;      // rotated box radius = box_factor * sqrt(N)
  bool single_precision = false;  // float sweeps for the big Monte Carlo
                                  // streams; oracles stay in double
};

/// Point-to-line from the origin on the truncated box.
double point_to_line(const DisorderField& env, double beta, long N, const SweepOptions& opt = {});

/// beta = 0 total mass retained by the truncated sweep (upper bounds the
/// truncation error of point_to_line); deterministic per (N, box).
double retained_mass(long N, const SweepOptions& opt = {});

/// Averaged partition function on the truncated box (phi must have compact
/// support; psi bounded).
double averaged(const DisorderField& env, double beta, long N, const TestFunction& phi,
                const TestFunction& psi, const SweepOptions& opt = {});

// ---- moment experiments ----

struct MomentOptions {
  double beta_hat = 0.5;
  long N = 1024;
  double h = 2.0;
  std::size_t replicas = 200;
  std::uint64_t seed = 1;
  int workers = 0;
  DisorderLaw law;
  double box_factor = 3.0;
  bool single_precision = false;  // float sweeps (plain path only)
  bool smoothed = true;  // conditional-expectation estimator for h = 2
  long m0 = -1;          // conditioning horizon for smoothing; default N/16
};

struct MomentEstimate {
  double h = 2.0;
  long N = 0;
  std::size_t replicas = 0;
  MeanCI ci;                    // headline estimator (control variates applied)
  MeanCI raw_ci;                // plain sample mean
  double limit = 1.0;           // (1/(1-bh^2))^{h(h-1)/2}
  std::vector<double> samples;  // per-replica values behind `ci` (CRN pairing)
};

/// Monte Carlo over environments of E[(Z_N)^h] via the transfer matrix.
MomentEstimate moment_estimate(const MomentOptions& opt);

/// Same moment through the collision identity
/// E[(Z_N)^h] = E^{x h}[exp(beta_N^2 sum_{i<j} L^{(i,j)}_{N-1})]; gaussian
/// disorder and integer h >= 2 only.
MomentEstimate moment_via_collisions(const MomentOptions& opt);

// ---- averaged field moments (Edwards-Wilkinson scale) ----

struct FieldOptions {
  TestFunction phi = phi_gaussian_bump(0.5);
  double beta_hat = M_SQRT1_2;  // beta_hat^2 = 1/2
  long N = 1024;
  int h = 2;
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  int workers = 0;
  double box_factor = 3.0;
  bool single_precision = false;  // float sweeps (h >= 3 plain path only)
  long m0 = -1;  // conditioning horizon (h = 2 smoothing); default N/16
};

struct FieldMoment {
  int h = 2;
  long N = 0;
  MeanCI ci;            // estimate of (log N)^{h/2} E[Zbar_N(phi)^h]
  double target = 0.0;  // rho_phi^h (h-1)!! for even h, 0 for odd h
  std::vector<double> samples;
};

FieldMoment field_moment(const FieldOptions& opt);

/// Exact (log N) E[Zbar_N(phi)^2] from the renewal pair correlation.
double field_second_moment_exact(const TestFunction& phi, double beta_hat, long N,
                                 const SweepOptions& opt = {});

// ---- limit constants ----

/// rho^2_phi(beta_hat) by numerical quadrature (1e-6 relative).
double rho_phi(const TestFunction& phi, double beta_hat);

/// Closed form for phi = g_s: (bh^2 / (2(1-bh^2))) log((2s+1)/(2s)).
double rho_phi_gaussian_closed_form(double s, double beta_hat);

/// rho^2 = log(1/(1-bh^2)); rejects beta_hat >= 1.
double rho_beta(double beta_hat);

}  // namespace dpoly

#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dpoly/disorder.hpp"
#include "dpoly/lattice.hpp"
#include "dpoly/partitions.hpp"
#include "dpoly/polymer.hpp"
#include "dpoly/renewal.hpp"

namespace dpoly {

// Constrained-space operators of the moment expansion. Spaces (Z^2)^h_I are
// indexed by one representative coordinate per block (dimension 2|I|) and
// truncated to a centred box; kernels are applied matrix-free through per-n
// dense kernel matrices on the box, which keeps h = 3 tractable.

struct BoxGrid {
  int B = 4;  // |x1|, |x2| <= B

  int side() const { return 2 * B + 1; }
  int npts() const { return side() * side(); }
  LatticePoint point(int idx) const { return {idx / side() - B, idx % side() - B}; }
  int index(const LatticePoint& p) const {
    if (std::abs(p.x1) > B || std::abs(p.x2) > B) return -1;
    return (p.x1 + B) * side() + (p.x2 + B);
  }
};

/// Weight w with Lipschitz log; built-ins w = 1 and w(x) = e^{-|x|}.
struct WeightFunction {
  enum class Kind { one, exp_neg_abs };
  Kind kind = Kind::one;

  double C_w() const { return kind == Kind::one ? 0.0 : 1.0; }
  double macro(double X1, double X2) const {
    return kind == Kind::one ? 1.0 : std::exp(-std::sqrt(X1 * X1 + X2 * X2));
  }
  double at(const LatticePoint& x, long N) const {
    const double rt = std::sqrt(double(N));
    return macro(double(x.x1) / rt, double(x.x2) / rt);
  }
};

// ---- pointwise kernel entries ----

/// Q^{I,J}_n(x, y) = 1{x~I} prod_i q_n(y_i - x_i) 1{y~J} on full h-tuples.
double Q_free_entry(long n, const SetPartition& I, const SetPartition& J,
                    const std::vector<LatticePoint>& x, const std::vector<LatticePoint>& y);

/// Laplace transform sum_{n=1}^{2N} e^{-lambda n / N} Q^{I,J}_n(x, y).
double Q_laplace_entry(long N, double lambda, const SetPartition& I, const SetPartition& J,
                       const std::vector<LatticePoint>& x, const std::vector<LatticePoint>& y);

/// Replica evolution entry; I must be a pair + singletons partition.
double U_replica_entry(const ReplicaWeightFunction& u, long n, const SetPartition& I,
                       const std::vector<LatticePoint>& x, const std::vector<LatticePoint>& y);

// ---- operator handles (matrix-free) ----

class KernelOp {
 public:
  virtual ~KernelOp() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& v) const = 0;
  virtual Eigen::VectorXd apply_t(const Eigen::VectorXd& v) const = 0;
};

struct OperatorConfig {
  long N = 16;
  double lambda = 0.0;
  int h = 3;
  BoxGrid box;
  WeightFunction w;
};

/// Weighted Laplace free-evolution operator Q^{I,J}_{N,lambda} between the
/// representative-coordinate spaces of I and J.
std::unique_ptr<KernelOp> Q_op(const OperatorConfig& cfg, const SetPartition& I,
                               const SetPartition& J);

/// Weighted replica operator U^I_{N,0}, |I| = h-1.
std::unique_ptr<KernelOp> U_op(const OperatorConfig& cfg, const SetPartition& I,
                               double beta_hat);

/// P^{I;J} = Q^{I,J} if |J| < h-1, else Q^{I,J} U^J.
std::unique_ptr<KernelOp> P_op(const OperatorConfig& cfg, const SetPartition& I,
                               const SetPartition& J, double beta_hat);

/// Dense assembly of the same operators (memory-guarded; for tests/oracles).
Eigen::MatrixXd Q_dense(const OperatorConfig& cfg, const SetPartition& I, const SetPartition& J);
Eigen::MatrixXd U_dense(const OperatorConfig& cfg, const SetPartition& I, double beta_hat);
Eigen::MatrixXd P_dense(const OperatorConfig& cfg, const SetPartition& I, const SetPartition& J,
                        double beta_hat);

// ---- norms ----

struct NormBracket {
  double lower = 0.0;  // best ascent value (valid lower bound)
  double upper = 0.0;  // interpolated row/column-sum bound
  bool converged = false;
};

/// l^q -> l^q norm bracket: fixed-point ascent (Boyd iteration; global for
/// positive kernels) for the lower bound, Riesz-Thorin interpolation of the
/// row/column sums for the upper bound. q = 2 uses power iteration on T^T T.
NormBracket op_norm(const KernelOp& T, double q, int restarts = 20, std::uint64_t seed = 7,
                    double tol = 1e-8);

/// || Qhat^{I,*} g^{x h} ||_q and the Prop-3.3 ratio to p N^{1/p} ||g||_q^h.
struct BoundaryCheck {
  double norm = 0.0;
  double reference = 0.0;  // p N^{1/p} ||g||^h_{l^q}
  double ratio = 0.0;
};
BoundaryCheck boundary_norm_check(const OperatorConfig& cfg, const SetPartition& I, double q,
                                  const std::function<double(LatticePoint)>& g);

/// Left boundary vector (Qhat^{*,I})^T (phi_N / w_N)^{x h} on I-space.
Eigen::VectorXd left_boundary_vector(const OperatorConfig& cfg, const SetPartition& I,
                                     const TestFunction& phi);

/// Right boundary vector Qhat^{I,*} w_N^{x h} on I-space.
Eigen::VectorXd right_boundary_vector(const OperatorConfig& cfg, const SetPartition& I);

// ---- section-4 bound profile ----

struct BoundProfile {
  double q = 0.0, p = 0.0;
  bool growth_ok = false;    // C p q / log N < 1/2
  double profile = 0.0;      // (C p q / log N)^{h/2} N^{h/q}
  double weight_factor = 0.0;  // N^{-h/q} ||w_N||^h_{l^q} by lattice summation
  double weight_bound = 0.0;   // e^{2 pi h / q^3}
};

BoundProfile bound_profile(int h, long N, double beta_hat, double C_fit, double a);

/// || w_N ||_{l^q} for w(x) = e^{-|x|} by direct lattice summation.
double weight_norm_lq(long N, double q);

// ---- appendix sum checks ----

enum class AppendixCase { s1, s2, s3, logp, s4 };

struct AppendixCheck {
  double value = 0.0;  // lattice sum / integral, tail below 1e-9 relative
  double bound = 0.0;  // the lemma's right-hand side at c = 1
  double ratio = 0.0;  // value / bound; the fitted constant is max(ratio)
};

AppendixCheck appendix_sum(AppendixCase which, double lambda, double r, double a, double p,
                           double A);

// ---- desk-scale moment-expansion inequality ----

struct MomentBoundCheck {
  double lhs = 0.0;          // exact |M_{N,h}| by path enumeration
  double rhs = 0.0;          // assembled operator-norm bound, truncated at k_max
  bool holds = false;
  double m2_exact = 0.0;     // exact M_{N,2} (sanity channel)
  double m2_renewal = 0.0;   // renewal-identity value of the same quantity
};

/// h = 3, gaussian disorder, phi = delta^{(N)}, psi = 1, small N.
MomentBoundCheck moment_bound_check(long N, double beta_hat, const WeightFunction& w, double p,
                                    double q, int k_max);

/// Exact E[(Z_N)^m] for gaussian disorder via the collision identity and a
/// dynamic program over the m-walk difference chain (m = 2 any N, m = 3 for
/// N <= 8). The reference values behind the renewal and moment checks.
double pair_moment_exact(long N, double beta);
double triple_moment_exact(long N, double beta);

std::string norm_csv_header();
std::string norm_csv_row(int h, long N, double q, const SetPartition& I, const SetPartition& J,
                         const NormBracket& nb, double bound);

}  // namespace dpoly

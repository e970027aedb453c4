#include "dpoly/polymer.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "dpoly/collision.hpp"
#include "dpoly/fft.hpp"
#include "dpoly/parallel.hpp"
#include "dpoly/renewal.hpp"
#include "dpoly/rng.hpp"
#include "dpoly/walk_kernel.hpp"

namespace dpoly {

// ---------------------------------------------------------------- test fns

double TestFunction::operator()(double X1, double X2) const {
  switch (kind) {
    case Kind::gaussian_bump: {
      const double r2 = X1 * X1 + X2 * X2;
      if (trunc_radius > 0.0 && r2 > trunc_radius * trunc_radius) return 0.0;
      return amplitude * std::exp(-r2 / (2.0 * param)) / (2.0 * M_PI * param);
    }
    case Kind::box:
      return (std::fabs(X1) <= param && std::fabs(X2) <= param) ? amplitude : 0.0;
    case Kind::delta0:
      return 0.0;  // handled via is_delta() by the lattice sweeps
    case Kind::one:
      return amplitude;
  }
  return 0.0;
}

double TestFunction::support_radius() const {
  switch (kind) {
    case Kind::gaussian_bump:
      return trunc_radius;
    case Kind::box:
      return param * M_SQRT2;
    case Kind::delta0:
      return 0.0;
    case Kind::one:
      return -1.0;  // unbounded
  }
  return 0.0;
}

TestFunction phi_gaussian_bump(double s, double mass_tol) {
  if (s <= 0.0) throw std::invalid_argument("gaussian bump: s must be > 0");
  TestFunction f;
  f.kind = TestFunction::Kind::gaussian_bump;
  f.param = s;
  f.trunc_radius = std::sqrt(2.0 * s * std::log(1.0 / mass_tol));
  return f;
}

TestFunction phi_box(double half_side) {
  TestFunction f;
  f.kind = TestFunction::Kind::box;
  f.param = half_side;
  return f;
}

TestFunction phi_delta() {
  TestFunction f;
  f.kind = TestFunction::Kind::delta0;
  return f;
}

TestFunction psi_one() { return TestFunction{}; }

// ------------------------------------------- exact plain-coordinate sweeps

namespace {

// dense window sweep; weights applied at times weight_lo..weight_hi
struct PlainSweep {
  int w;
  long t;
  Eigen::ArrayXXd f, g;

  PlainSweep(int window, long t0) : w(window), t(t0) {
    f.setZero(2 * w + 1, 2 * w + 1);
    g.setZero(2 * w + 1, 2 * w + 1);
  }

  void step() {
    const int n = 2 * w + 1;
    g.setZero();
    g.block(1, 0, n - 1, n) += 0.25 * f.block(0, 0, n - 1, n);
    g.block(0, 0, n - 1, n) += 0.25 * f.block(1, 0, n - 1, n);
    g.block(0, 1, n, n - 1) += 0.25 * f.block(0, 0, n, n - 1);
    g.block(0, 0, n, n - 1) += 0.25 * f.block(0, 1, n, n - 1);
    f.swap(g);
    ++t;
  }

  void weight(const DisorderField& env, double beta, double lambda, const LatticePoint& center) {
    for (int i = -w; i <= w; ++i)
      for (int j = -w; j <= w; ++j) {
        double& v = f(i + w, j + w);
        if (v == 0.0) continue;
        const LatticePoint z{center.x1 + i, center.x2 + j};
        v *= std::exp(beta * env.omega(t, z) - lambda);
      }
  }
};

}  // namespace

double point_to_point(const DisorderField& env, double beta, long a, long b,
                      const LatticePoint& x, const LatticePoint& y, int window) {
  if (a >= b) throw std::invalid_argument("point_to_point: need a < b");
  const long span = b - a;
  const int w = window < 0 ? int(span) : window;
  if ((y - x).l1() > span || !(y - x).parity_ok(span)) return 0.0;
  if (w < span && (y - x).l1() > w)
    throw std::invalid_argument("point_to_point: window does not cover the target");
  const double lambda = env.law().lambda(beta);
  PlainSweep s(w, a);
  s.f(w, w) = 1.0;
  for (long n = a + 1; n <= b; ++n) {
    s.step();
    if (n <= b - 1) s.weight(env, beta, lambda, x);
  }
  const LatticePoint d = y - x;
  return s.f(d.x1 + w, d.x2 + w);
}

double point_to_line_exact(const DisorderField& env, double beta, long N, const LatticePoint& x,
                           int window) {
  if (N < 1) throw std::invalid_argument("point_to_line: N must be >= 1");
  const int w = window < 0 ? int(N) : window;
  const double lambda = env.law().lambda(beta);
  PlainSweep s(w, 0);
  s.f(w, w) = 1.0;
  for (long n = 1; n <= N; ++n) {
    s.step();
    if (n <= N - 1) s.weight(env, beta, lambda, x);
  }
  return s.f.sum();
}

namespace {

// initial vector phi(x / sqrt N) over the window; empty-support check
double fill_phi(Eigen::ArrayXXd& f, int w, long N, const TestFunction& phi) {
  const double rt = std::sqrt(double(N));
  if (phi.is_delta()) {
    f(w, w) = double(N);
    return double(N);
  }
  double total = 0.0;
  for (int i = -w; i <= w; ++i)
    for (int j = -w; j <= w; ++j) {
      const double v = phi(double(i) / rt, double(j) / rt);
      f(i + w, j + w) = v;
      total += std::fabs(v);
    }
  return total;
}

}  // namespace

double averaged_exact(const DisorderField& env, double beta, long N, const TestFunction& phi,
                      const TestFunction& psi) {
  if (N < 1) throw std::invalid_argument("averaged: N must be >= 1");
  const double rphi = phi.support_radius();
  if (rphi < 0.0) throw std::invalid_argument("averaged: phi must have compact support");
  const int w = int(std::ceil(rphi * std::sqrt(double(N)))) + int(N);
  const double lambda = env.law().lambda(beta);
  PlainSweep s(w, 0);
  if (fill_phi(s.f, w, N, phi) == 0.0)
    throw std::invalid_argument("averaged: discretized support of phi is empty");
  for (long n = 1; n <= N; ++n) {
    s.step();
    if (n <= N - 1) s.weight(env, beta, lambda, {});
  }
  const double rt = std::sqrt(double(N));
  double acc = 0.0;
  for (int i = -w; i <= w; ++i)
    for (int j = -w; j <= w; ++j) {
      const double v = s.f(i + w, j + w);
      if (v != 0.0) acc += v * psi(double(i) / rt, double(j) / rt);
    }
  return acc / double(N);
}

double averaged_mean(long N, const TestFunction& phi, const TestFunction& psi) {
  DisorderField zero_env(DisorderLaw{}, 0, 0);
  return averaged_exact(zero_env, 0.0, N, phi, psi);
}

// ------------------------------------------------- rotated production sweep

namespace {

// AS241 central branch on a contiguous buffer, preallocated workspace,
// scalar tail fixup; the central branch covers 92.5% of draws
template <typename S>
struct IcdfWorkspace {
  using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
  Arr q_, r_, num_;

  void to_normal(Arr& p, Eigen::Index n) {
    if (q_.size() < n) {
      q_.resize(n);
      r_.resize(n);
      num_.resize(n);
    }
    auto q = q_.head(n);
    auto r = r_.head(n);
    auto num = num_.head(n);
    auto pp = p.head(n);
    q = pp - S(0.5);
    r = S(0.180625) - q * q;
    num = ((((((S(2.5090809287301226727e+3) * r + S(3.3430575583588128105e+4)) * r +
               S(6.7265770927008700853e+4)) * r + S(4.5921953931549871457e+4)) * r +
             S(1.3731693765509461125e+4)) * r + S(1.9715909503065514427e+3)) * r +
           S(1.3314166789178437745e+2)) * r + S(3.3871328727963666080e+0);
    r = ((((((S(5.2264952788528545610e+3) * r + S(2.8729085735721942674e+4)) * r +
             S(3.9307895800092710610e+4)) * r + S(2.1213794301586595867e+4)) * r +
           S(5.3941960214247511077e+3)) * r + S(6.8718700749205790830e+2)) * r +
         S(4.2313330701600911252e+1)) * r + S(1.0);
    num *= q;
    num /= r;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::fabs(double(q(i))) > 0.425) num(i) = S(normal_icdf(double(pp(i))));
    pp = num;
  }
};

// uniform variate sized to the scalar's mantissa, strictly inside (0,1)
template <typename S>
S unit_for(std::uint64_t x);
template <>
inline double unit_for<double>(std::uint64_t x) {
  return u64_to_unit(x);
}
template <>
inline float unit_for<float>(std::uint64_t x) {
  return (float(x >> 40) + 0.5f) * 0x1.0p-24f;
}

// Transfer matrix in rotated coordinates (u, v) = (x1+x2, x1-x2), where the
// walk performs independent +-1 steps in u and v. Sites of one parity class
// satisfy u = v = n + p0 (mod 2) and pack into a dense K x K grid,
// K = R+1-parity. Stored column-major as f(v_index, u_index). The scalar
// type is float for the large Monte Carlo streams and double for every
// oracle path.
template <typename S>
class RotSweepT {
 public:
  using Grid = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

  RotSweepT(int R, int parity_class) : R_(R), p0_(parity_class) {
    if (R_ % 2) ++R_;
    f_.setZero(R_ + 1, R_ + 1);
    scratch_.setZero(R_ + 1, R_ + 1);
  }

  int R() const { return R_; }
  int parity_at(long n) const { return int((n + p0_) & 1L); }
  int active(long n) const { return R_ + 1 - parity_at(n); }
  long u_of_index(int i, long n) const { return 2L * i - R_ + parity_at(n); }

  void init_delta() { f_(R_ / 2, R_ / 2) = S(1); }

  double init_phi(const TestFunction& phi, long N) {
    const double rt = std::sqrt(double(N));
    const int K = active(0);
    double total = 0.0;
    for (int i = 0; i < K; ++i) {
      const long u = u_of_index(i, 0);
      for (int j = 0; j < K; ++j) {
        const long v = u_of_index(j, 0);
        const double x1 = double(u + v) / 2.0, x2 = double(u - v) / 2.0;
        const double val = phi(x1 / rt, x2 / rt);
        f_(j, i) = S(val);
        total += std::fabs(val);
      }
    }
    return total;
  }

  // advance from time `from` to `to`, weighting slices n <= weight_hi
  void advance(long from, long to, const DisorderField* env, double beta, double lambda,
               long weight_hi) {
    for (long n = from + 1; n <= to; ++n) {
      step(n);
      if (env && n <= weight_hi) weight(n, *env, beta, lambda);
    }
  }

  double total(long n) const {
    const int K = active(n);
    return double(f_.block(0, 0, K, K).template cast<double>().sum());
  }

  const Grid& data() const { return f_; }

 private:
  // one nearest-neighbour step: independent two-point smoothing in u and v
  void step(long n_new) {
    const S half(0.5);
    const int pi_old = 1 - parity_at(n_new);
    if (pi_old == 0) {
      const int K = R_;  // new active size
      scratch_.block(0, 0, K + 1, K) =
          half * (f_.block(0, 0, K + 1, K) + f_.block(0, 1, K + 1, K));
      f_.block(0, 0, K, K) =
          half * (scratch_.block(0, 0, K, K) + scratch_.block(1, 0, K, K));
    } else {
      const int K = R_ + 1;  // new active size
      scratch_.col(0).head(K - 1) = half * f_.col(0).head(K - 1);
      scratch_.col(K - 1).head(K - 1) = half * f_.col(K - 2).head(K - 1);
      scratch_.block(0, 1, K - 1, K - 2) =
          half * (f_.block(0, 0, K - 1, K - 2) + f_.block(0, 1, K - 1, K - 2));
      f_.row(0).head(K) = half * scratch_.row(0).head(K);
      f_.row(K - 1).head(K) = half * scratch_.row(K - 2).head(K);
      f_.block(1, 0, K - 2, K) =
          half * (scratch_.block(0, 0, K - 2, K) + scratch_.block(1, 0, K - 2, K));
    }
  }

  void weight(long n, const DisorderField& env, double beta, double lambda) {
    const int K = active(n);
    const Eigen::Index cells = Eigen::Index(K) * K;
    const bool gauss = env.law().kind == DisorderKind::gaussian;
    if (buf_.size() < cells) buf_.resize(Eigen::Index(R_ + 1) * (R_ + 1));
    // contiguous fill, column per u value; the site hash hoists (n, u)
    if (gauss) {
      for (int i = 0; i < K; ++i) {
        const std::uint64_t rk = env.row_key(n, u_of_index(i, n));
        S* col = buf_.data() + std::size_t(i) * std::size_t(K);
        const long v0 = u_of_index(0, n);
        for (int j = 0; j < K; ++j)
          col[j] = unit_for<S>(mix64(rk, std::uint64_t(v0 + 2L * j)));
      }
      icdf_.to_normal(buf_, cells);
      buf_.head(cells) = (S(beta) * buf_.head(cells) - S(lambda)).exp();
    } else {
      const S wp = S(std::exp(beta - lambda)), wm = S(std::exp(-beta - lambda));
      for (int i = 0; i < K; ++i) {
        const std::uint64_t rk = env.row_key(n, u_of_index(i, n));
        S* col = buf_.data() + std::size_t(i) * std::size_t(K);
        const long v0 = u_of_index(0, n);
        for (int j = 0; j < K; ++j)
          col[j] = (mix64(rk, std::uint64_t(v0 + 2L * j)) >> 63) ? wp : wm;
      }
    }
    for (int i = 0; i < K; ++i)
      f_.col(i).head(K) *= Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
          buf_.data() + std::size_t(i) * std::size_t(K), K);
  }

  int R_;
  int p0_;
  Grid f_, scratch_;
  Eigen::Array<S, Eigen::Dynamic, 1> buf_;
  IcdfWorkspace<S> icdf_;
};

using RotSweep = RotSweepT<double>;

int rotated_radius(long N, double box_factor) {
  int R = int(std::ceil(box_factor * std::sqrt(double(N))));
  if (R % 2) ++R;
  return std::max(R, 4);
}

}  // namespace

namespace {

template <typename S>
double point_to_line_impl(const DisorderField& env, double beta, long N,
                          const SweepOptions& opt) {
  RotSweepT<S> s(rotated_radius(N, opt.box_factor), 0);
  s.init_delta();
  s.advance(0, N, &env, beta, env.law().lambda(beta), N - 1);
  return s.total(N);
}

}  // namespace

double point_to_line(const DisorderField& env, double beta, long N, const SweepOptions& opt) {
  if (N < 1) throw std::invalid_argument("point_to_line: N must be >= 1");
  return opt.single_precision ? point_to_line_impl<float>(env, beta, N, opt)
                              : point_to_line_impl<double>(env, beta, N, opt);
}

double retained_mass(long N, const SweepOptions& opt) {
  RotSweep s(rotated_radius(N, opt.box_factor), 0);
  s.init_delta();
  s.advance(0, N, nullptr, 0.0, 0.0, 0);
  return s.total(N);
}

double averaged(const DisorderField& env, double beta, long N, const TestFunction& phi,
                const TestFunction& psi, const SweepOptions& opt) {
  if (N < 1) throw std::invalid_argument("averaged: N must be >= 1");
  const double rphi = phi.support_radius();
  if (rphi < 0.0) throw std::invalid_argument("averaged: phi must have compact support");
  const double lambda = env.law().lambda(beta);
  const int R = rotated_radius(N, opt.box_factor) +
                2 * int(std::ceil(rphi * std::sqrt(2.0 * double(N)) / 2.0));
  const double rt = std::sqrt(double(N));

  auto psi_sum = [&](const RotSweep& s) {
    const int K = s.active(N);
    double cls_acc = 0.0;
    for (int i = 0; i < K; ++i) {
      const long u = s.u_of_index(i, N);
      for (int j = 0; j < K; ++j) {
        const double val = s.data()(j, i);
        if (val == 0.0) continue;
        const long v = s.u_of_index(j, N);
        cls_acc += val * psi(double(u + v) / (2.0 * rt), double(u - v) / (2.0 * rt));
      }
    }
    return cls_acc;
  };

  double acc = 0.0;
  bool any_support = false;
  for (int cls = 0; cls < 2; ++cls) {
    RotSweep s(R, cls);
    if (phi.is_delta()) {
      if (cls != 0) continue;
      s.init_delta();  // delta_0^{(N)} = N 1{x=0}, scale applied after the sweep
      any_support = true;
      s.advance(0, N, &env, beta, lambda, N - 1);
      acc += double(N) * psi_sum(s);
      continue;
    }
    if (s.init_phi(phi, N) == 0.0) continue;
    any_support = true;
    s.advance(0, N, &env, beta, lambda, N - 1);
    acc += psi_sum(s);
  }
  if (!any_support) throw std::invalid_argument("averaged: discretized support of phi is empty");
  return acc / double(N);
}

// ----------------------------------------------- continuation pair kernel

namespace {

// Fourier table of the continuation pair-moment kernel
//   kappa(d) = 1 + sigma^2 sum_{r=0}^{s-1} q_{2r}(d) Ebar(s - r),
// where Ebar(m) = sum_{j<m} U_N(j) = E[(Z_m)^2] and s is the number of
// weighted slices left of the horizon. In rotated coordinates
// q_{2r}(du, dv) has characteristic function (cos t1 cos t2)^{2r}, so the
// lattice transform of kappa - 1 is
//   khat(t) = sigma^2 sum_r rho^r Ebar(s-r),  rho = (cos t1 cos t2)^2,
// evaluated exactly at the DFT frequencies (this is the alias-folded
// transform, which is what the periodic pair sum needs).
struct PairKernel {
  int P = 0;
  long s = 0;
  double sigma2 = 0.0;
  Eigen::ArrayXXd khat;  // P x P
};

PairKernel make_pair_kernel(long N, long m0, double beta_hat, double sigma2, int P) {
  PairKernel pk;
  pk.P = P;
  pk.s = N - m0;
  pk.sigma2 = sigma2;
  const std::vector<double> u = U_line(N, beta_hat, pk.s);
  // erev[r] = Ebar(s - r)
  std::vector<double> erev(std::size_t(pk.s), 0.0);
  double run = 0.0;
  for (long m = 0; m < pk.s; ++m) {
    run += u[std::size_t(m)];
    erev[std::size_t(pk.s - 1 - m)] = run;
  }
  const double emax = run;
  pk.khat.setZero(P, P);
  std::vector<double> c(static_cast<std::size_t>(P));
  for (int j = 0; j < P; ++j) c[std::size_t(j)] = std::cos(2.0 * M_PI * double(j) / double(P));
  for (int j1 = 0; j1 <= P / 2; ++j1) {
    for (int j2 = 0; j2 <= j1; ++j2) {
      const double base = c[std::size_t(j1)] * c[std::size_t(j2)];
      const double rho = base * base;
      double acc = 0.0, pw = 1.0;
      for (long r = 0; r < pk.s; ++r) {
        acc += pw * erev[std::size_t(r)];
        pw *= rho;
        if (pw * emax < 1e-17 * (acc + 1e-300)) break;
      }
      const double val = sigma2 * acc;
      const int a1 = j1, a2 = j2, b1 = (P - j1) % P, b2 = (P - j2) % P;
      pk.khat(a1, a2) = pk.khat(a2, a1) = val;
      pk.khat(a1, b2) = pk.khat(b2, a1) = val;
      pk.khat(b1, a2) = pk.khat(a2, b1) = val;
      pk.khat(b1, b2) = pk.khat(b2, b1) = val;
    }
  }
  return pk;
}

int pick_fft_size(int support_side, long s) {
  // alias tail of kappa decays like exp(-k^2 / 4s); a 6.8 sqrt(s) margin
  // keeps the folded contribution below ~1e-5 of the kernel scale, which is
  // orders of magnitude under the statistical resolution of the pair sums
  const int margin = int(std::ceil(6.8 * std::sqrt(double(s)))) + 8;
  int P = 64;
  while (P < support_side + margin) P *= 2;
  return P;
}

// Sum_{y,y'} F(y) F(y') kappa~(y - y') over the embedded slice, plus the
// plain (sum F)^2 from the kernel's constant part, computed by Parseval.
struct SliceAccum {
  std::vector<std::complex<double>> grid;
  int P = 0;

  void reset(int P_) {
    P = P_;
    grid.assign(std::size_t(P) * std::size_t(P), {0.0, 0.0});
  }

  void embed(const RotSweep& s, long n) {
    const int K = s.active(n);
    for (int i = 0; i < K; ++i) {
      const long u = s.u_of_index(i, n);
      const int gu = int(((u % P) + P) % P);
      for (int j = 0; j < K; ++j) {
        const double val = s.data()(j, i);
        if (val == 0.0) continue;
        const long v = s.u_of_index(j, n);
        const int gv = int(((v % P) + P) % P);
        grid[std::size_t(gu) * std::size_t(P) + std::size_t(gv)] += val;
      }
    }
  }

  double quadratic(const PairKernel& pk) {
    fft2_inplace(grid, std::size_t(P), false);
    double acc = 0.0;
    for (int a = 0; a < P; ++a)
      for (int b = 0; b < P; ++b)
        acc += std::norm(grid[std::size_t(a) * std::size_t(P) + std::size_t(b)]) * pk.khat(a, b);
    return acc / (double(P) * double(P));
  }
};

}  // namespace

// --------------------------------------------------------- moment estimate

namespace {

double limit_moment(double beta_hat, double h) {
  return std::pow(1.0 / (1.0 - beta_hat * beta_hat), 0.5 * h * (h - 1.0));
}

// regression-adjusted mean: y - b (x - mu_x), b fitted by least squares
std::vector<double> control_adjust(const std::vector<double>& y,
                                   const std::vector<std::vector<double>>& xs,
                                   const std::vector<double>& mus) {
  const std::size_t n = y.size(), k = xs.size();
  if (k == 0) return y;
  double my = 0.0;
  for (double v : y) my += v / double(n);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(Eigen::Index(k), Eigen::Index(k));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(Eigen::Index(k));
  std::vector<double> mx(k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (double v : xs[a]) mx[a] += v / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      const double da = xs[a][i] - mx[a];
      c(Eigen::Index(a)) += da * (y[i] - my);
      for (std::size_t b = 0; b <= a; ++b)
        G(Eigen::Index(a), Eigen::Index(b)) += da * (xs[b][i] - mx[b]);
    }
  }
  G = G.selfadjointView<Eigen::Lower>();
  G += 1e-12 * double(n) * Eigen::MatrixXd::Identity(Eigen::Index(k), Eigen::Index(k));
  const Eigen::VectorXd beta = G.ldlt().solve(c);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double adj = y[i];
    for (std::size_t a = 0; a < k; ++a) adj -= beta(Eigen::Index(a)) * (xs[a][i] - mus[a]);
    out[i] = adj;
  }
  return out;
}

}  // namespace

MomentEstimate moment_estimate(const MomentOptions& opt) {
  if (opt.h < 0.0) throw std::invalid_argument("moment_estimate: h must be >= 0");
  MomentEstimate est;
  est.h = opt.h;
  est.N = opt.N;
  est.replicas = opt.replicas;
  est.limit = limit_moment(opt.beta_hat, opt.h);
  const TemperatureSchedule ts = solve_beta(opt.beta_hat, opt.N, opt.law);
  const double lambda = opt.law.lambda(ts.beta_N);

  if (opt.h == 0.0 || opt.h == 1.0 || opt.beta_hat == 0.0) {
    // normalized weights make these deterministic up to box truncation
    const double v = opt.h == 0.0
                         ? 1.0
                         : std::pow(retained_mass(opt.N, {opt.box_factor}), opt.h);
    est.ci = {v, 0.0, 0.99};
    est.raw_ci = est.ci;
    est.samples.assign(opt.replicas, v);
    return est;
  }

  const bool smooth = opt.smoothed && opt.h == 2.0;
  if (smooth) {
    const long m0 = opt.m0 > 0 ? opt.m0 : std::max(4L, opt.N / 16);
    if (m0 >= opt.N) throw std::invalid_argument("moment_estimate: m0 must be < N");
    const int R = rotated_radius(m0, 4.0);
    const int P = pick_fft_size(2 * R + 1, opt.N - m0);
    const PairKernel pk = make_pair_kernel(opt.N, m0, opt.beta_hat, ts.sigma2, P);
    std::vector<double> vals(opt.replicas, 0.0);
    parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
      DisorderField env(opt.law, opt.seed, r);
      RotSweep s(R, 0);
      s.init_delta();
      s.advance(0, m0, &env, ts.beta_N, lambda, m0 - 1);
      const double s1 = s.total(m0);
      thread_local SliceAccum acc;
      acc.reset(P);
      acc.embed(s, m0);
      vals[r] = s1 * s1 + acc.quadratic(pk);
    });
    SampleSet ss{vals};
    est.ci = mean_ci(ss);
    est.raw_ci = est.ci;
    est.samples = std::move(vals);
    return est;
  }

  // plain Monte Carlo over environments, with Z and Z^2 control variates
  const SweepOptions sweep_opt{opt.box_factor, opt.single_precision};
  std::vector<double> z(opt.replicas, 0.0);
  parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
    DisorderField env(opt.law, opt.seed, r);
    z[r] = point_to_line(env, ts.beta_N, opt.N, sweep_opt);
  });
  std::vector<double> y(opt.replicas);
  for (std::size_t r = 0; r < opt.replicas; ++r)
    y[r] = (opt.h == 2.0) ? z[r] * z[r]
                          : ((opt.h == 3.0) ? z[r] * z[r] * z[r]
                                            : std::exp(opt.h * std::log(z[r])));
  SampleSet raw{y};
  est.raw_ci = mean_ci(raw);

  const double mu1 = retained_mass(opt.N, {opt.box_factor});
  std::vector<std::vector<double>> xs{z};
  std::vector<double> mus{mu1};
  if (opt.h > 2.0) {
    std::vector<double> z2(opt.replicas);
    for (std::size_t r = 0; r < opt.replicas; ++r) z2[r] = z[r] * z[r];
    xs.push_back(std::move(z2));
    mus.push_back(second_moment_exact(U_line(opt.N, opt.beta_hat, opt.N - 1), opt.N));
  }
  std::vector<double> adj = control_adjust(y, xs, mus);
  SampleSet as{adj};
  est.ci = mean_ci(as);
  est.samples = std::move(adj);
  return est;
}

MomentEstimate moment_via_collisions(const MomentOptions& opt) {
  if (opt.law.kind != DisorderKind::gaussian)
    throw std::invalid_argument("moment_via_collisions: gaussian disorder only");
  const double hr = opt.h;
  const int h = int(hr);
  if (double(h) != hr || h < 2)
    throw std::invalid_argument("moment_via_collisions: integer h >= 2 required");
  MomentEstimate est;
  est.h = opt.h;
  est.N = opt.N;
  est.replicas = opt.replicas;
  est.limit = limit_moment(opt.beta_hat, opt.h);
  const TemperatureSchedule ts = solve_beta(opt.beta_hat, opt.N, opt.law);
  const double b2 = ts.beta_N * ts.beta_N;
  std::vector<double> w(opt.replicas, 0.0);
  parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
    const CollisionTally t =
        simulate(h, opt.N, opt.seed, r, CollisionEndpoint::exclusive_N);
    w[r] = std::exp(b2 * double(t.total));
  });
  SampleSet ss{w};
  est.ci = mean_ci(ss);
  est.raw_ci = est.ci;
  est.samples = std::move(w);
  return est;
}

// ------------------------------------------------------------ field moments

FieldMoment field_moment(const FieldOptions& opt) {
  if (opt.h < 2) throw std::invalid_argument("field_moment: h must be >= 2");
  const double rphi = opt.phi.support_radius();
  if (rphi < 0.0) throw std::invalid_argument("field_moment: phi must have compact support");
  FieldMoment fm;
  fm.h = opt.h;
  fm.N = opt.N;
  const double rho2 = rho_phi(opt.phi, opt.beta_hat);
  fm.target = (opt.h % 2 == 0)
                  ? std::pow(rho2, 0.5 * opt.h) * double_factorial(opt.h - 1)
                  : 0.0;

  const DisorderLaw law{};  // gaussian environment for the field experiments
  const TemperatureSchedule ts = solve_beta(opt.beta_hat, opt.N, law);
  const double lambda = law.lambda(ts.beta_N);
  const double logN = std::log(double(opt.N));
  const double rt = std::sqrt(double(opt.N));
  const int R = rotated_radius(opt.N, opt.box_factor) +
                2 * int(std::ceil(rphi * rt * M_SQRT2 / 2.0));

  if (opt.h == 2) {
    // conditional-expectation estimator at horizon m0
    const long m0 = opt.m0 > 0 ? opt.m0 : std::max(4L, opt.N / 16);
    const int Rm = 2 * int(std::ceil((rphi * rt * M_SQRT2 + 4.0 * std::sqrt(double(m0))) / 2.0));
    const int P = pick_fft_size(2 * Rm + 1, opt.N - m0);
    const PairKernel pk = make_pair_kernel(opt.N, m0, opt.beta_hat, ts.sigma2, P);
    // truncated-model mean of Z(phi,1): weightless sweeps
    double mu = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
      RotSweep s(Rm, cls);
      if (s.init_phi(opt.phi, opt.N) == 0.0) continue;
      s.advance(0, m0, nullptr, 0.0, 0.0, 0);
      mu += s.total(m0);
    }
    mu /= double(opt.N);
    std::vector<double> vals(opt.replicas, 0.0);
    parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
      DisorderField env(DisorderLaw{}, opt.seed, r);
      thread_local SliceAccum acc;
      acc.reset(P);
      double s1 = 0.0;
      for (int cls = 0; cls < 2; ++cls) {
        RotSweep s(Rm, cls);
        if (s.init_phi(opt.phi, opt.N) == 0.0) continue;
        s.advance(0, m0, &env, ts.beta_N, lambda, m0 - 1);
        s1 += s.total(m0);
        acc.embed(s, m0);
      }
      const double ez = s1 / double(opt.N);
      const double ez2 = (s1 * s1 + acc.quadratic(pk)) / (double(opt.N) * double(opt.N));
      vals[r] = logN * (ez2 - 2.0 * mu * ez + mu * mu);
    });
    SampleSet ss{vals};
    fm.ci = mean_ci(ss);
    fm.samples = std::move(vals);
    return fm;
  }

  // plain sweeps for h >= 3
  double mu = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    RotSweep s(R, cls);
    if (s.init_phi(opt.phi, opt.N) == 0.0) continue;
    s.advance(0, opt.N, nullptr, 0.0, 0.0, 0);
    mu += s.total(opt.N);
  }
  mu /= double(opt.N);
  std::vector<double> vals(opt.replicas, 0.0);
  const double scale = std::pow(logN, 0.5 * double(opt.h));
  auto run_replica = [&](auto scalar_tag, std::size_t r) {
    using S = decltype(scalar_tag);
    DisorderField env(DisorderLaw{}, opt.seed, r);
    double z = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
      RotSweepT<S> s(R, cls);
      if (s.init_phi(opt.phi, opt.N) == 0.0) continue;
      s.advance(0, opt.N, &env, ts.beta_N, lambda, opt.N - 1);
      z += s.total(opt.N);
    }
    z /= double(opt.N);
    vals[r] = scale * std::pow(z - mu, double(opt.h));
  };
  parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
    if (opt.single_precision) run_replica(float{}, r);
    else run_replica(double{}, r);
  });
  SampleSet ss{vals};
  fm.ci = mean_ci(ss);
  fm.samples = std::move(vals);
  return fm;
}

double field_second_moment_exact(const TestFunction& phi, double beta_hat, long N,
                                 const SweepOptions& opt) {
  (void)opt;
  const double rphi = phi.support_radius();
  if (rphi < 0.0) throw std::invalid_argument("field_second_moment_exact: compact phi required");
  const TemperatureSchedule ts = solve_beta(beta_hat, N, DisorderLaw{});
  const double rt = std::sqrt(double(N));
  const int Rm = 2 * int(std::ceil(rphi * rt * M_SQRT2 / 2.0)) + 2;
  const int P = pick_fft_size(2 * Rm + 1, N);
  const PairKernel pk = make_pair_kernel(N, 0, beta_hat, ts.sigma2, P);

  // Cov(Z(x), Z(x')) = kappa~_{s=N}(x - x') - sigma^2 Ebar(N) 1{x = x'},
  // since two distinct starting points cannot interact before one step.
  SliceAccum acc;
  acc.reset(P);
  double sum_phi2 = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    RotSweep s(Rm, cls);
    if (s.init_phi(phi, N) == 0.0) continue;
    acc.embed(s, 0);
    const int K = s.active(0);
    sum_phi2 += (s.data().block(0, 0, K, K) * s.data().block(0, 0, K, K)).sum();
  }
  const double quad = acc.quadratic(pk);
  const double ebarN = second_moment_exact(U_line(N, beta_hat, N - 1), N);
  const double cov_sum = quad - ts.sigma2 * ebarN * sum_phi2;
  return std::log(double(N)) * cov_sum / (double(N) * double(N));
}

// ------------------------------------------------------------ rho constants

namespace {

// overlap integral A(t) = int phi g_t phi in closed form per built-in
double phi_overlap_A(const TestFunction& phi, double t) {
  const double amp2 = phi.amplitude * phi.amplitude;
  switch (phi.kind) {
    case TestFunction::Kind::gaussian_bump:
      // g_s * g_t * g_s at 0 = 1 / (2 pi (2s + t))
      return amp2 / (2.0 * M_PI * (2.0 * phi.param + t));
    case TestFunction::Kind::box: {
      // [int int_{[-r,r]^2} g1_t(x-y)]^2 with the 1d closed form
      const double r = phi.param;
      const double c = 2.0 * r;
      const double g0 = 1.0 / std::sqrt(2.0 * M_PI * t);
      const double gc = g0 * std::exp(-c * c / (2.0 * t));
      const double a = 2.0 * (c * (normal_cdf(c / std::sqrt(t)) - 0.5) - t * (g0 - gc));
      return amp2 * a * a;
    }
    default:
      throw std::invalid_argument("rho_phi: phi must be integrable (gaussian bump or box)");
  }
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double tol, int depth, bool& converged) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth > 40) {
    converged = false;
    return left + right;
  }
  if (std::fabs(left + right - whole) < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  bool c1 = true, c2 = true;
  const double lv = simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth + 1, c1);
  const double rv = simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth + 1, c2);
  converged = c1 && c2;
  return lv + rv;
}

}  // namespace

double rho_phi(const TestFunction& phi, double beta_hat) {
  if (beta_hat < 0.0 || beta_hat >= 1.0)
    throw std::invalid_argument("rho_phi: beta_hat must lie in [0,1)");
  if (beta_hat == 0.0) return 0.0;
  auto f = [&](double t) { return phi_overlap_A(phi, t); };
  bool converged = true;
  const double fa = f(1e-12), fm = f(0.5), fb = f(1.0);
  const double integral = simpson(f, 1e-12, 1.0, fa, fm, fb, 1e-8 * std::max(1.0, fm), 0, converged);
  if (!converged) throw std::runtime_error("rho_phi: quadrature did not converge");
  const double b2 = beta_hat * beta_hat;
  return M_PI * b2 / (1.0 - b2) * integral;
}

double rho_phi_gaussian_closed_form(double s, double beta_hat) {
  const double b2 = beta_hat * beta_hat;
  return b2 / (2.0 * (1.0 - b2)) * std::log((2.0 * s + 1.0) / (2.0 * s));
}

double rho_beta(double beta_hat) {
  if (beta_hat < 0.0 || beta_hat >= 1.0)
    throw std::invalid_argument("rho_beta: beta_hat must lie in [0,1)");
  return -std::log1p(-beta_hat * beta_hat);
}

}  // namespace dpoly

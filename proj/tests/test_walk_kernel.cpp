#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpoly/walk_kernel.hpp"

using namespace dpoly;

TEST_CASE("one-step kernel is the uniform law on the four neighbours") {
  const KernelTable t = kernel(1);
  CHECK(t(LatticePoint{1, 0}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t(LatticePoint{0, 1}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t(LatticePoint{-1, 0}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t(LatticePoint{0, -1}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t(LatticePoint{0, 0}) == 0.0);
  CHECK(t.sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("two-step kernel matches the 16-path enumeration") {
  const KernelTable t = kernel(2);
  CHECK(t(LatticePoint{0, 0}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t(LatticePoint{1, 1}) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(t(LatticePoint{2, 0}) == doctest::Approx(0.0625).epsilon(1e-15));
}

TEST_CASE("q_4(0) from the self-convolution of the exact q_2 table") {
  const KernelTable q2 = kernel(2);
  double v = 0.0;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b)
      v += q2(LatticePoint{a, b}) * q2(LatticePoint{-a, -b});
  CHECK(v == doctest::Approx(9.0 / 64.0).epsilon(1e-15));
  CHECK(kernel(4)(LatticePoint{0, 0}) == doctest::Approx(9.0 / 64.0).epsilon(1e-15));
}

TEST_CASE("kernel equals the integer path-count convolution oracle, n <= 12") {
  for (long n = 0; n <= 12; ++n) {
    const KernelTable t = kernel(n);
    const CountTable c = kernel_counts_by_convolution(n);
    const double denom = std::pow(4.0, double(n));
    double max_err = 0.0;
    for (int i = -int(n); i <= int(n); ++i)
      for (int j = -int(n); j <= int(n); ++j) {
        const double exact = double(c(LatticePoint{i, j})) / denom;
        max_err = std::max(max_err, std::fabs(t(LatticePoint{i, j}) - exact));
      }
    CHECK(max_err < 1e-12);
    CHECK(t.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("kernel rejects negative n") { CHECK_THROWS(kernel(-1)); }

TEST_CASE("dihedral symmetry") {
  const KernelTable t = kernel(5);
  for (int i = -5; i <= 5; ++i)
    for (int j = -5; j <= 5; ++j) {
      const double v = t(LatticePoint{i, j});
      CHECK(t(LatticePoint{-i, -j}) == v);
      CHECK(t(LatticePoint{j, i}) == v);
      CHECK(t(LatticePoint{-i, j}) == v);
      if (!LatticePoint{i, j}.parity_ok(5)) CHECK(v == 0.0);
    }
}

TEST_CASE("return probabilities") {
  CHECK(return_prob(1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(return_prob(2) == doctest::Approx(9.0 / 64.0).epsilon(1e-15));
  // Chapman-Kolmogorov at the origin: q_{2n}(0) = sum_z q_n(z)^2
  for (long n = 1; n <= 10; ++n) {
    const KernelTable t = kernel(n);
    CHECK(return_prob(n) == doctest::Approx((t.values * t.values).sum()).epsilon(1e-12));
    CHECK(return_prob(n) == doctest::Approx(kernel(2 * n)(LatticePoint{0, 0})).epsilon(1e-12));
  }
  // q_{2n}(0) ~ 1/(pi n)
  CHECK(M_PI * 1e4 * return_prob(10000) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("overlap sums") {
  CHECK(overlap(1).value == doctest::Approx(0.25).epsilon(1e-15));
  const OverlapSum r2 = overlap(2);
  CHECK(r2.value == doctest::Approx(25.0 / 64.0).epsilon(1e-14));
  CHECK(r2.per_term[0] == doctest::Approx(0.25));
  CHECK(r2.per_term[1] == doctest::Approx(9.0 / 64.0));

  // strictly increasing in N
  double prev = 0.0;
  for (long N = 1; N <= 64; ++N) {
    const double v = overlap_value(N);
    CHECK(v > prev);
    prev = v;
  }
  // recurrence against the log-space binomial at scattered n
  const OverlapSum big = overlap(1 << 16);
  for (long n : {100L, 5000L, 65536L})
    CHECK(big.per_term[std::size_t(n - 1)] == doctest::Approx(return_prob(n)).epsilon(1e-11));
}

TEST_CASE("overlap asymptotic with alpha = gamma + log 16 - pi") {
  CHECK(overlap_alpha() == doctest::Approx(0.2080).epsilon(1e-3));
  const long N = 1L << 20;
  const double lhs = M_PI * overlap_value(N) / std::log(double(N));
  const double rhs = 1.0 + overlap_alpha() / std::log(double(N));
  CHECK(std::fabs(lhs - rhs) < 0.002);

  // drift |R_N - (log N + alpha)/pi| decreasing along the grid
  double prev_drift = 1e9;
  for (long n : {1L << 10, 1L << 14, 1L << 18, 1L << 20}) {
    const double drift =
        std::fabs(overlap_value(n) - (std::log(double(n)) + overlap_alpha()) / M_PI);
    CHECK(drift < prev_drift);
    prev_drift = drift;
  }
}

TEST_CASE("heat kernel") {
  CHECK(heat_kernel(1.0, 0.0, 0.0) == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-15));
  CHECK(heat_kernel(2.0, 0.0, 0.0) == doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-15));
  CHECK_THROWS(heat_kernel(0.0, 0.0, 0.0));
  CHECK_THROWS(heat_kernel(-1.0, 1.0, 1.0));

  // quadrature of g_t over a generous box
  const double t = 0.7;
  const double L = 8.0 * std::sqrt(t);
  const int M = 400;
  const double hgrid = 2.0 * L / M;
  double integral = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      const double x = -L + (i + 0.5) * hgrid;
      const double y = -L + (j + 0.5) * hgrid;
      integral += heat_kernel(t, x, y) * hgrid * hgrid;
    }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("local CLT gap decreases") {
  const double g2 = local_clt_gap(100);
  const double g3 = local_clt_gap(1000);
  const double g4 = local_clt_gap(10000);
  CHECK(g3 < g2);
  CHECK(g4 < g3);
}

TEST_CASE("csv export") {
  const std::string csv = kernel_to_csv(kernel(1));
  CHECK(csv.find("n,x1,x2,q") == 0);
  CHECK(csv.find("1,0,-1,0.25") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpoly/rng.hpp"
#include "dpoly/stats.hpp"

using namespace dpoly;

TEST_CASE("batch-means CI") {
  SampleSet constant;
  constant.values.assign(512, 3.5);
  const MeanCI c = mean_ci(constant);
  CHECK(c.mean == doctest::Approx(3.5));
  CHECK(c.half_width == doctest::Approx(0.0));

  SampleSet normals;
  for (int i = 0; i < 10000; ++i) normals.values.push_back(keyed_normal(mix64(42, i)));
  const MeanCI n = mean_ci(normals, 0.99);
  CHECK(std::fabs(n.mean) < 0.05);
  CHECK(n.contains(0.0));

  SampleSet expo;
  for (int i = 0; i < 10000; ++i)
    expo.values.push_back(-std::log(u64_to_unit(mix64(43, i))));
  const MeanCI e = mean_ci(expo, 0.99);
  CHECK(std::fabs(e.mean - 1.0) < 0.05);

  SampleSet tiny;
  tiny.values.assign(50, 1.0);
  CHECK_THROWS(mean_ci(tiny));
}

TEST_CASE("regularized incomplete gamma") {
  CHECK(gamma_cdf(1.0, 2.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
  CHECK(gamma_cdf(3.0, 3.0) ==
        doctest::Approx(1.0 - 8.5 * std::exp(-3.0)).epsilon(1e-12));  // 0.57681...
  CHECK(gamma_cdf(2.5, 0.0) == 0.0);
  CHECK_THROWS(gamma_p(-1.0, 1.0));
  CHECK_THROWS(gamma_p(1.0, -1.0));

  // monotone, limits 0 and 1
  double prev = -1.0;
  for (double x = 0.0; x < 40.0; x += 0.5) {
    const double v = gamma_cdf(4.0, x);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(gamma_cdf(4.0, 200.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gamma cdf against adaptive quadrature of the density") {
  // independent oracle: composite Simpson on the density
  auto density = [](double a, double x) {
    return std::exp((a - 1.0) * std::log(x) - x - std::lgamma(a));
  };
  for (const double a : {0.7, 1.0, 2.0, 3.5, 6.0}) {
    for (const double x : {0.25, 1.0, 3.0, 7.5}) {
      const int M = 200000;
      const double hstep = x / M;
      double integral = 0.0;
      for (int i = 0; i < M; ++i) {
        const double t0 = i * hstep, t1 = t0 + hstep, tm = t0 + 0.5 * hstep;
        const double f0 = t0 == 0.0 ? (a > 1.0 ? 0.0 : (a == 1.0 ? 1.0 : density(a, 1e-300)))
                                    : density(a, t0);
        integral += hstep / 6.0 * (f0 + 4.0 * density(a, tm) + density(a, t1));
      }
      if (a >= 1.0) CHECK(gamma_p(a, x) == doctest::Approx(integral).epsilon(1e-10));
    }
  }
}

TEST_CASE("KS distance") {
  // samples from the target law stay below the 1% critical value
  SampleSet s;
  for (int i = 0; i < 10000; ++i) s.values.push_back(u64_to_unit(mix64(7, i)));
  const double d = ks_distance(s, [](double x) { return std::min(1.0, std::max(0.0, x)); });
  CHECK(d < ks_critical(10000, 0.01));
  CHECK(ks_critical(10000, 0.01) == doctest::Approx(1.628 / 100.0).epsilon(0.01));

  // all samples at zero against Exp(1): sup gap is 1
  SampleSet zeros;
  zeros.values.assign(200, 0.0);
  CHECK(ks_distance(zeros, [](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x); }) ==
        doctest::Approx(1.0));

  // invariance under a strictly increasing transform
  SampleSet cubed = s;
  for (double& v : cubed.values) v = v * v * v;
  const double d2 = ks_distance(cubed, [](double x) {
    const double r = std::cbrt(std::min(1.0, std::max(0.0, x)));
    return r;
  });
  CHECK(d2 == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("double factorial and lognormal moments") {
  CHECK(double_factorial(1) == 1.0);
  CHECK(double_factorial(3) == 3.0);
  CHECK(double_factorial(5) == 15.0);
  CHECK(lognormal_moment(std::log(4.0 / 3.0), 2.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(lognormal_moment(0.7, 1.0) == doctest::Approx(1.0));
  CHECK(lognormal_moment(0.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("lognormal cdf sanity") {
  const double rho2 = 0.4;
  CHECK(lognormal_cdf(rho2, std::exp(-0.5 * rho2)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lognormal_cdf(rho2, 0.0) == 0.0);
}

TEST_CASE("normal icdf round trip") {
  for (double x = -5.0; x <= 5.0; x += 0.25)
    CHECK(normal_icdf(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
}

TEST_CASE("fit report") {
  SampleSet s;
  for (int i = 0; i < 5000; ++i) s.values.push_back(-std::log(u64_to_unit(mix64(99, i))));
  const FitReport fr = fit_against(s, "Exp(1)",
                                   [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); },
                                   {1.0, 2.0, 6.0, 24.0});
  CHECK(fr.pass);
  CHECK(fr.empirical_moments[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(fr.to_csv().find("Exp(1)") != std::string::npos);
}

#pragma once

#include <functional>
#include <string>
#include <vector>

namespace dpoly {

/// Replica samples with the batch structure used for confidence intervals.
struct SampleSet {
  std::vector<double> values;
  int batches = 32;

  std::size_t size() const { return values.size(); }
};

struct MeanCI {
  double mean = 0.0;
  double half_width = 0.0;  // at the requested confidence level
  double level = 0.99;

  bool contains(double x) const {
    return x >= mean - half_width && x <= mean + half_width;
  }
};

/// Batch-means confidence interval; requires >= 100 samples.
MeanCI mean_ci(const SampleSet& s, double level = 0.99);

/// Overlap test for two independent interval estimates of the same quantity.
bool ci_overlap(const MeanCI& a, const MeanCI& b);

/// Regularized lower incomplete gamma P(a, x); series for x < a+1, continued
/// fraction otherwise, 1e-12 target.
double gamma_p(double a, double x);

/// cdf of the Gamma(a, 1) law.
double gamma_cdf(double a, double x);

/// Exact sup-gap KS statistic of a sample against a cdf.
double ks_distance(SampleSet s, const std::function<double(double)>& cdf);

/// One-sample KS critical value at level alpha (asymptotic), e.g. 1.63/sqrt(n) at 1%.
double ks_critical(std::size_t n, double alpha);

/// (h-1)!! for integer h >= 1.
double double_factorial(int m);

/// h-th moment exp(h(h-1) rho^2 / 2) of exp(rho X - rho^2/2), X ~ N(0,1).
double lognormal_moment(double rho2, double h);

/// cdf of the lognormal reference law exp(rho X - rho^2/2).
double lognormal_cdf(double rho2, double x);

/// Student-free normal quantile for CI half-widths.
double normal_quantile(double p);

/// Fit of a sample against a named reference law.
struct FitReport {
  std::string law;
  double ks = 0.0;
  std::vector<double> empirical_moments;    // orders 1..4
  std::vector<double> theoretical_moments;  // orders 1..4
  bool pass = false;

  std::string to_csv() const;
  std::string to_table() const;
};

FitReport fit_against(const SampleSet& s, const std::string& law_name,
                      const std::function<double(double)>& cdf,
                      const std::vector<double>& theoretical_moments);

}  // namespace dpoly

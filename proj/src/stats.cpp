#include "dpoly/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dpoly/rng.hpp"

namespace dpoly {

double normal_quantile(double p) { return normal_icdf(p); }

MeanCI mean_ci(const SampleSet& s, double level) {
  if (s.values.size() < 100) throw std::invalid_argument("mean_ci: need at least 100 samples");
  const int b = std::max(2, s.batches);
  const std::size_t n = s.values.size();
  const std::size_t per = n / std::size_t(b);
  std::vector<double> means;
  means.reserve(std::size_t(b));
  for (int k = 0; k < b; ++k) {
    const std::size_t lo = std::size_t(k) * per;
    const std::size_t hi = (k == b - 1) ? n : lo + per;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += s.values[i];
    means.push_back(acc / double(hi - lo));
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= double(means.size());
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  var /= double(means.size()) * double(means.size() - 1);
  const double z = normal_icdf(0.5 + 0.5 * level);
  MeanCI ci;
  ci.mean = m;
  ci.half_width = z * std::sqrt(var);
  ci.level = level;
  return ci;
}

bool ci_overlap(const MeanCI& a, const MeanCI& b) {
  return std::fabs(a.mean - b.mean) <= a.half_width + b.half_width;
}

double gamma_p(double a, double x) {
  if (a <= 0.0) throw std::domain_error("gamma_p: a must be > 0");
  if (x < 0.0) throw std::domain_error("gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    // series: P(a,x) = x^a e^-x / Gamma(a) * sum_k x^k / (a)_{k+1}
    double ap = a, sum = 1.0 / a, del = sum;
    for (int k = 0; k < 1000; ++k) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a,x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

double gamma_cdf(double a, double x) {
  if (x <= 0.0) return 0.0;
  return gamma_p(a, x);
}

double ks_distance(SampleSet s, const std::function<double(double)>& cdf) {
  if (s.values.size() < 100) throw std::invalid_argument("ks_distance: need at least 100 samples");
  std::sort(s.values.begin(), s.values.end());
  const double n = double(s.values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double f = cdf(s.values[i]);
    d = std::max(d, (double(i) + 1.0) / n - f);
    d = std::max(d, f - double(i) / n);
  }
  return d;
}

double ks_critical(std::size_t n, double alpha) {
  // K(c) = 1 - 2 sum (-1)^{k-1} e^{-2 k^2 c^2}; invert by bisection
  auto tail = [](double c) {
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double t = 2.0 * std::exp(-2.0 * double(k) * double(k) * c * c);
      s += (k % 2 == 1) ? t : -t;
      if (t < 1e-18) break;
    }
    return s;
  };
  double lo = 0.2, hi = 3.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail(mid) > alpha) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi) / std::sqrt(double(n));
}

double double_factorial(int m) {
  if (m < -1) throw std::invalid_argument("double_factorial: m must be >= -1");
  double r = 1.0;
  for (int k = m; k >= 2; k -= 2) r *= double(k);
  return r;
}

double lognormal_moment(double rho2, double h) {
  return std::exp(0.5 * h * (h - 1.0) * rho2);
}

double lognormal_cdf(double rho2, double x) {
  if (rho2 <= 0.0) return x >= 1.0 ? 1.0 : 0.0;
  if (x <= 0.0) return 0.0;
  const double rho = std::sqrt(rho2);
  return normal_cdf((std::log(x) + 0.5 * rho2) / rho);
}

std::string FitReport::to_csv() const {
  char buf[256];
  std::string out = "law,ks,order,empirical,theoretical,pass\n";
  for (std::size_t i = 0; i < empirical_moments.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%zu,%.17g,%.17g,%d\n", law.c_str(), ks, i + 1,
                  empirical_moments[i], theoretical_moments[i], pass ? 1 : 0);
    out += buf;
  }
  return out;
}

std::string FitReport::to_table() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "fit vs %s: KS = %.6g (%s)\n", law.c_str(), ks,
                pass ? "pass" : "check");
  std::string out = buf;
  for (std::size_t i = 0; i < empirical_moments.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  moment %zu: empirical %.6g  theoretical %.6g\n", i + 1,
                  empirical_moments[i], theoretical_moments[i]);
    out += buf;
  }
  return out;
}

FitReport fit_against(const SampleSet& s, const std::string& law_name,
                      const std::function<double(double)>& cdf,
                      const std::vector<double>& theoretical_moments) {
  FitReport r;
  r.law = law_name;
  r.ks = ks_distance(s, cdf);
  const double n = double(s.values.size());
  r.empirical_moments.assign(4, 0.0);
  for (double v : s.values) {
    double p = 1.0;
    for (int k = 0; k < 4; ++k) {
      p *= v;
      r.empirical_moments[std::size_t(k)] += p / n;
    }
  }
  r.theoretical_moments = theoretical_moments;
  r.pass = r.ks < ks_critical(s.values.size(), 0.01);
  return r;
}

}  // namespace dpoly

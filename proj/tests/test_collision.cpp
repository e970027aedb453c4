#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dpoly/collision.hpp"
#include "dpoly/parallel.hpp"
#include "dpoly/stats.hpp"
#include "dpoly/walk_kernel.hpp"

using namespace dpoly;

TEST_CASE("pair indexing is lexicographic") {
  CHECK(pair_index(0, 1, 4) == 0);
  CHECK(pair_index(0, 3, 4) == 2);
  CHECK(pair_index(1, 2, 4) == 3);
  CHECK(pair_index(2, 3, 4) == 5);
  CHECK(pair_count(4) == 6);
}

TEST_CASE("one-step collision probability is 1/4") {
  // P(L^{(1,2)}_1 = 1) = sum_z q_1(z)^2 = 1/4
  const std::size_t R = 100000;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < R; ++r) hits += simulate(2, 1, 5, r).total == 1;
  CHECK(std::fabs(double(hits) / double(R) - 0.25) < 0.005);
}

TEST_CASE("three walks, one step: E[total] = 3/4") {
  const std::size_t R = 100000;
  double acc = 0.0;
  for (std::size_t r = 0; r < R; ++r) acc += double(simulate(3, 1, 6, r).total);
  CHECK(std::fabs(acc / double(R) - 0.75) < 0.01);
}

TEST_CASE("tally agrees with trajectory replay") {
  for (std::size_t r = 0; r < 100; ++r) {
    const int h = 3;
    const long N = 200;
    const CollisionTally t = simulate(h, N, 17, r);
    std::vector<std::vector<LatticePoint>> paths(h);
    for (int w = 0; w < h; ++w) walk_path(17, r, w, N, paths[std::size_t(w)]);
    std::vector<std::int64_t> counts(pair_count(h), 0);
    for (long n = 1; n <= N; ++n)
      for (int i = 0; i < h; ++i)
        for (int j = i + 1; j < h; ++j)
          if (paths[std::size_t(i)][std::size_t(n)] == paths[std::size_t(j)][std::size_t(n)])
            ++counts[pair_index(i, j, h)];
    CHECK(counts == t.pairwise);
    std::int64_t tot = 0;
    for (auto c : counts) tot += c;
    CHECK(tot == t.total);
  }
}

TEST_CASE("grid snapshots are prefix sums of one trajectory") {
  const auto grid = simulate_grid(3, {16, 64, 256}, 23, 5);
  CHECK(grid.size() == 3);
  CHECK(grid[0].pairwise == simulate(3, 16, 23, 5).pairwise);
  CHECK(grid[1].pairwise == simulate(3, 64, 23, 5).pairwise);
  for (std::size_t p = 0; p < grid[0].pairwise.size(); ++p) {
    CHECK(grid[0].pairwise[p] <= grid[1].pairwise[p]);
    CHECK(grid[1].pairwise[p] <= grid[2].pairwise[p]);
  }
}

TEST_CASE("endpoint conventions differ by the final time slice") {
  for (std::size_t r = 0; r < 50; ++r) {
    const CollisionTally inc = simulate(2, 31, 3, r, CollisionEndpoint::inclusive_N);
    const CollisionTally exc = simulate(2, 32, 3, r, CollisionEndpoint::exclusive_N);
    CHECK(inc.total == exc.total);  // both sum times 1..31
  }
  CHECK(simulate(2, 1, 3, 0, CollisionEndpoint::exclusive_N).total == 0);
}

TEST_CASE("determinism regardless of parallel execution") {
  std::vector<CollisionTally> a(64), b(64);
  parallel_for(64, 1, [&](std::size_t r) { a[r] = simulate(4, 500, 99, r); });
  parallel_for(64, 2, [&](std::size_t r) { b[r] = simulate(4, 500, 99, r); });
  for (std::size_t r = 0; r < 64; ++r) {
    CHECK(a[r].pairwise == b[r].pairwise);
  }
}

TEST_CASE("scaled total") {
  CollisionTally t;
  t.N = 1024;
  t.total = 0;
  CHECK(scaled_total(t).value == 0.0);
  t.total = 100;
  CHECK(scaled_total(t).value == doctest::Approx(M_PI * 100.0 / std::log(1024.0)));
  t.N = 1;
  CHECK_THROWS(scaled_total(t));
}

TEST_CASE("mean identity: E[L^{(i,j)}_N] = R_N for every pair") {
  const long N = 1024;
  const std::size_t R = 20000;
  const double exact = overlap_value(N);
  std::vector<CollisionTally> tallies(R);
  parallel_for(R, 0, [&](std::size_t r) { tallies[r] = simulate(3, N, 31, r); });
  for (std::size_t p = 0; p < pair_count(3); ++p) {
    SampleSet s;
    s.values.reserve(R);
    for (std::size_t r = 0; r < R; ++r) s.values.push_back(double(tallies[r].pairwise[p]));
    const MeanCI ci = mean_ci(s, 0.99);
    CHECK(ci.contains(exact));
  }
}

namespace {
// tie-aware two-sample KS: compare the empirical cdfs only at points where
// both tie blocks have been consumed (the counts are small integers)
double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (i < a.size() && j < b.size()) v = std::min(a[i], b[j]);
    else if (i < a.size()) v = a[i];
    else v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::fabs(double(i) / double(a.size()) - double(j) / double(b.size())));
  }
  return d;
}
}  // namespace

TEST_CASE("exchangeability of the pairwise laws") {
  const long N = 1024;
  const std::size_t R = 10000;
  std::vector<std::vector<double>> per_pair(pair_count(3));
  std::vector<CollisionTally> tallies(R);
  parallel_for(R, 0, [&](std::size_t r) { tallies[r] = simulate(3, N, 37, r); });
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t p = 0; p < per_pair.size(); ++p)
      per_pair[p].push_back(double(tallies[r].pairwise[p]));
  // two-sample 1% critical value 1.628 sqrt((n+m)/(nm))
  const double crit = 1.628 * std::sqrt(2.0 / double(R));
  for (std::size_t p = 1; p < per_pair.size(); ++p)
    CHECK(two_sample_ks(per_pair[0], per_pair[p]) < crit);
}

TEST_CASE("gamma reference") {
  CHECK(gamma_reference(2).shape == doctest::Approx(1.0));
  CHECK(gamma_reference(2).cdf(1.3) == doctest::Approx(1.0 - std::exp(-1.3)).epsilon(1e-12));
  CHECK(gamma_reference(3).shape == doctest::Approx(3.0));
  CHECK(gamma_reference(3).mgf(0.5) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(gamma_reference(5).mgf(0.0) == doctest::Approx(1.0));
  CHECK_THROWS(gamma_reference(5).mgf(1.0));
  CHECK_THROWS(gamma_reference(1));
  const GammaReference g = gamma_reference(3);
  CHECK(g.density(0.0) == 0.0);
  CHECK(g.density(2.0) == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("empirical mgf") {
  SampleSet zeros;
  zeros.values.assign(500, 0.0);
  const MgfEstimate e = empirical_mgf(zeros, 0.5);
  CHECK(e.ci.mean == doctest::Approx(1.0));
  CHECK(e.ci.half_width == doctest::Approx(0.0));
  CHECK_FALSE(e.heavy_tail_warning);
  CHECK(empirical_mgf(zeros, 0.85).heavy_tail_warning);
  CHECK_THROWS(empirical_mgf(zeros, 1.0));
  CHECK_THROWS(empirical_mgf(zeros, -0.3));
}

TEST_CASE("mean of Y_N matches pi R_N / log N within its CI") {
  const long N = 1024;
  const std::size_t R = 3000;
  std::vector<CollisionTally> tallies(R);
  parallel_for(R, 0, [&](std::size_t r) { tallies[r] = simulate(2, N, 41, r); });
  SampleSet y;
  for (std::size_t r = 0; r < R; ++r) y.values.push_back(scaled_total(tallies[r]).value);
  const MeanCI ci = mean_ci(y, 0.99);
  CHECK(ci.contains(M_PI * overlap_value(N) / std::log(double(N))));
}

TEST_CASE("tally csv") {
  const CollisionTally t = simulate(3, 64, 1, 0);
  CHECK(tally_csv_header(3) == "replica_id,h,N,L_1_2,L_1_3,L_2_3,total,scaled_total\n");
  const std::string row = tally_csv_row(0, t);
  CHECK(row.find("0,3,64,") == 0);
}

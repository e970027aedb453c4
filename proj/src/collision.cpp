#include "dpoly/collision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dpoly/rng.hpp"

namespace dpoly {

namespace {
constexpr std::uint64_t kWalkDomain = 0x636f6c6cULL;  // stream tag

inline std::uint64_t walk_key(std::uint64_t seed, std::uint64_t replica, int walk) {
  return mix64(seed, kWalkDomain, replica, std::uint64_t(walk));
}
}  // namespace

std::size_t pair_index(int i, int j, int h) {
  // pairs (0,1), (0,2), ..., (0,h-1), (1,2), ...
  return std::size_t(i) * std::size_t(h) - std::size_t(i) * (std::size_t(i) + 1) / 2 +
         std::size_t(j - i - 1);
}

void walk_path(std::uint64_t seed, std::uint64_t replica, int walk, long N,
               std::vector<LatticePoint>& out) {
  out.assign(std::size_t(N) + 1, LatticePoint{});
  CounterStream rs(walk_key(seed, replica, walk));
  LatticePoint p{};
  for (long n = 1; n <= N; ++n) {
    p = p + kSteps[rs.next_2bits()];
    out[std::size_t(n)] = p;
  }
}

std::vector<CollisionTally> simulate_grid(int h, const std::vector<long>& Ns, std::uint64_t seed,
                                          std::uint64_t replica, CollisionEndpoint endpoint) {
  if (h < 2) throw std::invalid_argument("simulate: h must be >= 2");
  if (Ns.empty()) throw std::invalid_argument("simulate: empty horizon grid");
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (Ns[i] < 1 || (i > 0 && Ns[i] <= Ns[i - 1]))
      throw std::invalid_argument("simulate: horizons must be increasing and >= 1");
  }
  const long N_max = Ns.back();
  const std::size_t np = pair_count(h);

  std::vector<CounterStream> streams;
  streams.reserve(std::size_t(h));
  for (int w = 0; w < h; ++w) streams.emplace_back(walk_key(seed, replica, w));

  std::vector<LatticePoint> pos(static_cast<std::size_t>(h));
  std::vector<std::int64_t> counts(np, 0);
  std::vector<std::pair<std::uint64_t, int>> keys(static_cast<std::size_t>(h));

  std::vector<CollisionTally> out;
  out.reserve(Ns.size());
  std::size_t next_grid = 0;

  auto snapshot = [&](long horizon) {
    CollisionTally t;
    t.h = h;
    t.N = horizon;
    t.pairwise = counts;
    t.total = 0;
    for (auto c : t.pairwise) t.total += c;
    out.push_back(std::move(t));
    ++next_grid;
  };

  const bool exclusive = endpoint == CollisionEndpoint::exclusive_N;
  // exclusive horizon N snapshots after step N-1; N = 1 is an empty sum
  while (exclusive && next_grid < Ns.size() && Ns[next_grid] == 1) snapshot(1);

  const long n_stop = exclusive ? N_max - 1 : N_max;
  for (long n = 1; n <= n_stop; ++n) {
    for (int w = 0; w < h; ++w) pos[std::size_t(w)] = pos[std::size_t(w)] + kSteps[streams[std::size_t(w)].next_2bits()];
    // sort packed positions; equal runs mark colliding groups
    for (int w = 0; w < h; ++w) keys[std::size_t(w)] = {pack_point(pos[std::size_t(w)]), w};
    std::sort(keys.begin(), keys.end());
    std::size_t a = 0;
    while (a < keys.size()) {
      std::size_t b = a + 1;
      while (b < keys.size() && keys[b].first == keys[a].first) ++b;
      for (std::size_t i = a; i < b; ++i)
        for (std::size_t j = i + 1; j < b; ++j) {
          const int wi = std::min(keys[i].second, keys[j].second);
          const int wj = std::max(keys[i].second, keys[j].second);
          ++counts[pair_index(wi, wj, h)];
        }
      a = b;
    }
    const long reached = exclusive ? n + 1 : n;
    while (next_grid < Ns.size() && Ns[next_grid] == reached) snapshot(Ns[next_grid]);
  }
  return out;
}

CollisionTally simulate(int h, long N, std::uint64_t seed, std::uint64_t replica,
                        CollisionEndpoint endpoint) {
  return simulate_grid(h, {N}, seed, replica, endpoint).front();
}

ScaledTotal scaled_total(const CollisionTally& t) {
  if (t.N < 2) throw std::invalid_argument("scaled_total: N must be >= 2");
  return {M_PI * double(t.total) / std::log(double(t.N))};
}

double GammaReference::density(double x) const {
  if (x <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
}

double GammaReference::cdf(double x) const { return gamma_cdf(shape, x); }

double GammaReference::mgf(double t) const {
  if (t >= 1.0) throw std::domain_error("gamma mgf diverges for t >= 1");
  return std::pow(1.0 - t, -shape);
}

GammaReference gamma_reference(int h) {
  if (h < 2) throw std::invalid_argument("gamma_reference: h must be >= 2");
  return {0.5 * double(h) * double(h - 1)};
}

MgfEstimate empirical_mgf(const SampleSet& scaled_totals, double t) {
  if (scaled_totals.values.empty()) throw std::invalid_argument("empirical_mgf: empty sample");
  if (t <= 0.0 || t >= 1.0) throw std::domain_error("empirical_mgf: t must lie in (0,1)");
  SampleSet e;
  e.batches = scaled_totals.batches;
  e.values.reserve(scaled_totals.values.size());
  for (double y : scaled_totals.values) e.values.push_back(std::exp(t * y));
  MgfEstimate r;
  r.t = t;
  r.ci = mean_ci(e, 0.99);
  r.heavy_tail_warning = t > 0.8;
  return r;
}

std::string tally_csv_header(int h) {
  std::string s = "replica_id,h,N";
  char buf[32];
  for (int i = 0; i < h; ++i)
    for (int j = i + 1; j < h; ++j) {
      std::snprintf(buf, sizeof(buf), ",L_%d_%d", i + 1, j + 1);
      s += buf;
    }
  s += ",total,scaled_total\n";
  return s;
}

std::string tally_csv_row(std::uint64_t replica, const CollisionTally& t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%llu,%d,%ld", (unsigned long long)replica, t.h, t.N);
  std::string s = buf;
  for (auto c : t.pairwise) {
    std::snprintf(buf, sizeof(buf), ",%lld", (long long)c);
    s += buf;
  }
  const double y = t.N >= 2 ? scaled_total(t).value : 0.0;
  std::snprintf(buf, sizeof(buf), ",%lld,%.17g\n", (long long)t.total, y);
  s += buf;
  return s;
}

}  // namespace dpoly

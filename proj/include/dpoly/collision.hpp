#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpoly/lattice.hpp"
#include "dpoly/stats.hpp"

namespace dpoly {

/// h independent simple walks, all started at the origin at time zero.
struct WalkEnsemble {
  int h = 2;
  long time = 0;
  std::vector<LatticePoint> positions;

  explicit WalkEnsemble(int h_) : h(h_), positions(std::size_t(h_)) {}
};

/// Whether the collision sum runs to N (total-collision convention) or to
/// N-1 (the second-moment identity convention). The O(1) difference is
/// immaterial to every limit.
enum class CollisionEndpoint { inclusive_N, exclusive_N };

inline std::size_t pair_count(int h) { return std::size_t(h) * std::size_t(h - 1) / 2; }

/// Lexicographic index of the pair (i, j), 0 <= i < j < h.
std::size_t pair_index(int i, int j, int h);

struct CollisionTally {
  int h = 2;
  long N = 0;
  std::vector<std::int64_t> pairwise;  // lexicographic (i,j) order
  std::int64_t total = 0;
};

/// Deterministic trajectory of walk `walk` in replica `replica`; filled into
/// `out[n]`, n = 0..N. Exposed so tests can replay tallies.
void walk_path(std::uint64_t seed, std::uint64_t replica, int walk, long N,
               std::vector<LatticePoint>& out);

/// Pairwise collision local times up to time N (per `endpoint`).
CollisionTally simulate(int h, long N, std::uint64_t seed, std::uint64_t replica,
                        CollisionEndpoint endpoint = CollisionEndpoint::inclusive_N);

/// Tallies at each horizon of an increasing grid, from one trajectory per
/// walk (prefix sums), keeping replicas common across horizons.
std::vector<CollisionTally> simulate_grid(int h, const std::vector<long>& Ns, std::uint64_t seed,
                                          std::uint64_t replica,
                                          CollisionEndpoint endpoint = CollisionEndpoint::inclusive_N);

struct ScaledTotal {
  double value = 0.0;  // (pi / log N) * total
};

ScaledTotal scaled_total(const CollisionTally& t);

/// The Gamma(h(h-1)/2, 1) reference law of the scaled total.
struct GammaReference {
  double shape = 1.0;

  double density(double x) const;
  double cdf(double x) const;
  double mgf(double t) const;  // (1-t)^{-shape}, rejects t >= 1
};

GammaReference gamma_reference(int h);

struct MgfEstimate {
  double t = 0.0;
  MeanCI ci;
  bool heavy_tail_warning = false;  // t > 0.8
};

/// Sample mean of exp(t Y) with batch-means CI; t must lie in (0,1).
MgfEstimate empirical_mgf(const SampleSet& scaled_totals, double t);

/// One CSV row per replica: replica_id, h, N, L_{i,j} (lex order), total, scaled.
std::string tally_csv_header(int h);
std::string tally_csv_row(std::uint64_t replica, const CollisionTally& t);

}  // namespace dpoly

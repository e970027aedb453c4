#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>

namespace dpoly {

/// A point of the planar lattice Z^2.
struct LatticePoint {
  int x1 = 0;
  int x2 = 0;

  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;

  LatticePoint operator+(const LatticePoint& o) const { return {x1 + o.x1, x2 + o.x2}; }
  LatticePoint operator-(const LatticePoint& o) const { return {x1 - o.x1, x2 - o.x2}; }
  LatticePoint operator-() const { return {-x1, -x2}; }

  int l1() const { return std::abs(x1) + std::abs(x2); }
  double l2sq() const { return double(x1) * x1 + double(x2) * x2; }

  // Simple-walk parity: q_n(x) vanishes unless x1+x2 == n (mod 2).
  bool parity_ok(long n) const { return (((long)x1 + x2 - n) & 1L) == 0; }
};

inline std::uint64_t pack_point(const LatticePoint& p) {
  return (std::uint64_t(std::uint32_t(p.x1)) << 32) | std::uint64_t(std::uint32_t(p.x2));
}

struct LatticePointHash {
  std::size_t operator()(const LatticePoint& p) const {
    std::uint64_t z = pack_point(p) * 0x9e3779b97f4a7c15ULL;
    z ^= z >> 29;
    return std::size_t(z * 0xbf58476d1ce4e5b9ULL);
  }
};

// The four nearest-neighbour steps of the simple walk.
inline constexpr LatticePoint kSteps[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

}  // namespace dpoly

#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace dpoly {

/// Iterative radix-2 complex FFT, power-of-two length.
inline void fft_inplace(std::complex<double>* a, std::size_t n, bool inverse) {
  if (n == 0 || (n & (n - 1))) throw std::invalid_argument("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / double(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (std::size_t i = 0; i < n; ++i) a[i] /= double(n);
}

/// In-place 2d FFT of a row-major P x P complex grid.
inline void fft2_inplace(std::vector<std::complex<double>>& grid, std::size_t P, bool inverse) {
  if (grid.size() != P * P) throw std::invalid_argument("fft2: bad grid size");
  for (std::size_t r = 0; r < P; ++r) fft_inplace(grid.data() + r * P, P, inverse);
  std::vector<std::complex<double>> col(P);
  for (std::size_t c = 0; c < P; ++c) {
    for (std::size_t r = 0; r < P; ++r) col[r] = grid[r * P + c];
    fft_inplace(col.data(), P, inverse);
    for (std::size_t r = 0; r < P; ++r) grid[r * P + c] = col[r];
  }
}

}  // namespace dpoly

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "magloc/error.hpp"

namespace magloc {

using complex = std::complex<double>;

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 transform; size must be a power of two.
// sign = -1 forward, +1 inverse (unscaled).
inline void fft_radix2(std::vector<complex>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by recurrence to keep error at machine precision.
    std::vector<complex> tw(half);
    for (std::size_t k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const complex u = a[i + k];
        const complex v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Bluestein chirp-z transform for arbitrary n.
inline void fft_bluestein(std::vector<complex>& a, int sign) {
  const std::size_t n = a.size();
  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const auto kk = static_cast<unsigned long long>(k) * k % (2ULL * n);
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * static_cast<double>(kk) / static_cast<double>(n));
  }
  std::vector<complex> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  fft_radix2(x, -1);
  fft_radix2(y, -1);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_radix2(x, +1);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

inline void transform(std::vector<complex>& a, int sign) {
  if (a.size() <= 1) return;
  if (is_power_of_two(a.size()))
    fft_radix2(a, sign);
  else
    fft_bluestein(a, sign);
}

}  // namespace detail

/// Complex DFT, X_k = sum_j x_j exp(-2 pi i j k / n). Any length.
inline std::vector<complex> fft(std::vector<complex> a) {
  detail::transform(a, -1);
  return a;
}

/// Inverse DFT including the 1/n scaling.
inline std::vector<complex> ifft(std::vector<complex> a) {
  detail::transform(a, +1);
  const double scale = a.empty() ? 1.0 : 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
  return a;
}

enum class window_function { rectangular, hann };

struct spectrum {
  std::vector<complex> bins;
  double sample_rate = 1.0;
  std::size_t n = 0;

  double frequency(std::size_t k) const { return static_cast<double>(k) * sample_rate / static_cast<double>(n); }
};

inline spectrum dft(std::span<const double> x, double sample_rate = 1.0,
                    window_function window = window_function::rectangular) {
  const std::size_t n = x.size();
  if (n < 2) fail(errc::too_short, "dft needs at least 2 samples");
  std::vector<complex> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (window == window_function::hann)
      w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    a[i] = complex(x[i] * w, 0.0);
  }
  return spectrum{fft(std::move(a)), sample_rate, n};
}

/// Time-domain reconstruction of a spectrum (real part).
inline std::vector<double> inverse(const spectrum& s) {
  auto a = ifft(s.bins);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].real();
  return out;
}

struct power_bin {
  double frequency = 0.0;
  double power = 0.0;
};

/// One-sided power, bins k = 0..floor(n/2), power = |X_k|^2 / n.
inline std::vector<power_bin> power_spectrum(std::span<const double> x, double sample_rate = 1.0,
                                             window_function window = window_function::rectangular) {
  const auto s = dft(x, sample_rate, window);
  const std::size_t half = s.n / 2;
  std::vector<power_bin> out(half + 1);
  for (std::size_t k = 0; k <= half; ++k)
    out[k] = {s.frequency(k), std::norm(s.bins[k]) / static_cast<double>(s.n)};
  return out;
}

}  // namespace magloc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/spectral.hpp"

namespace magloc {

enum class distance_tag { dtw, euclidean, cosine, bhattacharyya, gcc };

inline const char* to_string(distance_tag t) {
  switch (t) {
    case distance_tag::dtw: return "dtw";
    case distance_tag::euclidean: return "euclidean";
    case distance_tag::cosine: return "cosine";
    case distance_tag::bhattacharyya: return "bhattacharyya";
    case distance_tag::gcc: return "gcc";
  }
  return "unknown";
}

inline distance_tag parse_distance_tag(const std::string& s) {
  if (s == "dtw") return distance_tag::dtw;
  if (s == "euclidean" || s == "euclid") return distance_tag::euclidean;
  if (s == "cosine") return distance_tag::cosine;
  if (s == "bhattacharyya" || s == "bhatt") return distance_tag::bhattacharyya;
  if (s == "gcc") return distance_tag::gcc;
  fail(errc::configuration, "unknown distance '" + s + "'");
}

inline constexpr std::size_t default_histogram_bins = 16;
inline constexpr double bhattacharyya_epsilon = 1e-12;

struct distance_kind {
  distance_tag tag = distance_tag::euclidean;
  std::optional<std::size_t> dtw_radius;
  std::size_t bins = default_histogram_bins;

  void validate() const {
    if (tag == distance_tag::bhattacharyya && bins < 2)
      fail(errc::configuration, "bhattacharyya needs at least 2 histogram bins");
  }
};

namespace detail {

inline void require_equal_length(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size())
    fail(errc::dimension, std::string(who) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
  if (a.empty()) fail(errc::degenerate_input, std::string(who) + ": empty input");
}

}  // namespace detail

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  detail::require_equal_length(a, b, "euclidean");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// 1 - cos(angle); lies in [0, 2].
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  detail::require_equal_length(a, b, "cosine");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) fail(errc::degenerate_input, "cosine: zero-norm input");
  const double c = std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
  return 1.0 - c;
}

/// Dynamic time warping with absolute-difference local cost, pinned endpoints
/// and the match/insert/delete recurrence. An optional Sakoe-Chiba radius
/// excludes cells with |i - j| > radius.
inline double dtw(std::span<const double> a, std::span<const double> b,
                  std::optional<std::size_t> radius = std::nullopt) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) fail(errc::degenerate_input, "dtw: empty input");
  if (radius) {
    const std::size_t gap = n > m ? n - m : m - n;
    if (gap > *radius)
      fail(errc::invalid_window, "dtw: radius " + std::to_string(*radius) + " cannot bridge length gap " +
                                     std::to_string(gap));
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(cur.begin(), cur.end(), inf);
    std::size_t lo = 1, hi = m;
    if (radius) {
      lo = i > *radius ? std::max<std::size_t>(1, i - *radius) : 1;
      hi = std::min(m, i + *radius);
    }
    for (std::size_t j = lo; j <= hi; ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = std::abs(a[i - 1] - b[j - 1]) + best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Bhattacharyya distance between equal-width histograms over the shared
/// value range: -ln(sum sqrt(p q) + eps), floored at zero.
inline double bhattacharyya(std::span<const double> a, std::span<const double> b,
                            std::size_t bins = default_histogram_bins) {
  if (a.empty() || b.empty()) fail(errc::degenerate_input, "bhattacharyya: empty input");
  if (bins < 2) fail(errc::configuration, "bhattacharyya: need at least 2 bins");
  double lo = a[0], hi = a[0];
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  const double width = hi - lo;
  auto histogram = [&](std::span<const double> x) {
    std::vector<double> h(bins, 0.0);
    for (double v : x) {
      std::size_t k = 0;
      if (width > 0.0) {
        const double pos = (v - lo) / width * static_cast<double>(bins);
        k = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(pos))));
      }
      h[k] += 1.0;
    }
    for (auto& c : h) c /= static_cast<double>(x.size());
    return h;
  };
  const auto p = histogram(a);
  const auto q = histogram(b);
  double bc = 0.0;
  for (std::size_t k = 0; k < bins; ++k) bc += std::sqrt(p[k] * q[k]);
  return std::max(0.0, -std::log(bc + bhattacharyya_epsilon));
}

namespace detail {

// Zero-padded forward transform used by GCC; the padded size is the
// smallest power of two >= n.
inline std::vector<complex> gcc_spectrum(std::span<const double> x) {
  std::vector<complex> buf(next_power_of_two(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = complex(x[i], 0.0);
  fft_radix2(buf, -1);
  return buf;
}

inline bool has_energy(std::span<const double> x) {
  return std::any_of(x.begin(), x.end(), [](double v) { return v != 0.0; });
}

// PHAT-weighted correlation peak in [0, 1] from two precomputed spectra.
inline double gcc_similarity(const std::vector<complex>& xa, const std::vector<complex>& xb) {
  const std::size_t n = xa.size();
  std::vector<complex> cross(n);
  double peak_mag = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cross[k] = xa[k] * std::conj(xb[k]);
    peak_mag = std::max(peak_mag, std::abs(cross[k]));
  }
  if (peak_mag == 0.0) return 0.0;
  const double guard = peak_mag * 1e-12;
  for (auto& c : cross) {
    const double mag = std::abs(c);
    c = mag > guard ? c / mag : complex(0.0, 0.0);
  }
  fft_radix2(cross, +1);
  double best = 0.0;
  for (const auto& r : cross) best = std::max(best, std::abs(r) / static_cast<double>(n));
  return std::clamp(best, 0.0, 1.0);
}

}  // namespace detail

/// 1 - max_tau |R_phat(tau)|, where R_phat is the PHAT-whitened
/// cross-correlation of the two (power-of-two padded) inputs.
inline double gcc_distance(std::span<const double> a, std::span<const double> b) {
  detail::require_equal_length(a, b, "gcc");
  if (a.size() < 4) fail(errc::too_short, "gcc: inputs need at least 4 samples");
  if (!detail::has_energy(a) || !detail::has_energy(b)) fail(errc::degenerate_input, "gcc: zero-energy input");
  return 1.0 - detail::gcc_similarity(detail::gcc_spectrum(a), detail::gcc_spectrum(b));
}

inline double distance(const distance_kind& kind, std::span<const double> a, std::span<const double> b) {
  switch (kind.tag) {
    case distance_tag::dtw: return dtw(a, b, kind.dtw_radius);
    case distance_tag::euclidean: return euclidean(a, b);
    case distance_tag::cosine: return cosine_distance(a, b);
    case distance_tag::bhattacharyya: return bhattacharyya(a, b, kind.bins);
    case distance_tag::gcc: return gcc_distance(a, b);
  }
  fail(errc::configuration, "unknown distance kind");
}

/// Dense row-major square matrix.
class square_matrix {
public:
  square_matrix() = default;
  explicit square_matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Full symmetric distance matrix with a zero diagonal. Each unordered pair
/// is evaluated once as d(item_i, item_j) with i < j.
inline square_matrix pairwise_matrix(const std::vector<std::vector<double>>& items, const distance_kind& kind) {
  kind.validate();
  const std::size_t n = items.size();
  square_matrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0.0;
      try {
        d = distance(kind, items[i], items[j]);
      } catch (const error& e) {
        throw error(e.code(), "pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
      }
      m(i, j) = d;
      m(j, i) = d;
    }
  }
  return m;
}

}  // namespace magloc

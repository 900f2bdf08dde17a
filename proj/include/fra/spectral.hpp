#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "fra/tensor.hpp"

namespace fra {

// ---------------------------------------------------------------------------
// Orthonormal Type-II DCT.
//
//   X[k] = s_k * sum_n x[n] cos(pi/N (n + 1/2) k),  s_0 = sqrt(1/N), s_k = sqrt(2/N)
//
// The basis matrix is orthogonal, so the inverse is its transpose and
// Parseval holds. Row k >= 1 differs from the unnormalized transform only by
// the common factor sqrt(2/N), which leaves energy rankings among k >= 1 intact.

namespace detail {

inline Matrix build_dct_matrix(std::size_t n) {
  Matrix m(n, n);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = k == 0 ? s0 : sk;
    for (std::size_t i = 0; i < n; ++i)
      m(k, i) = scale * std::cos(std::numbers::pi / static_cast<double>(n) *
                                 (static_cast<double>(i) + 0.5) * static_cast<double>(k));
  }
  return m;
}

}  // namespace detail

/// The N x N orthonormal DCT-II basis (row k = frequency k). Cached per thread.
inline const Matrix& dct_matrix(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<const Matrix>> cache;
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<const Matrix>(detail::build_dct_matrix(n))).first;
  return *it->second;
}

/// Token-wise DCT coefficients of a P x d patch sequence plus per-row energies.
struct SpectralStack {
  Matrix coeffs;                // P x d, row k = frequency k
  std::vector<double> energy;   // energy[k] = ||coeffs.row(k)||_2

  std::size_t tokens() const { return coeffs.rows(); }
};

inline std::vector<double> row_energies(const Matrix& coeffs) {
  std::vector<double> e(coeffs.rows());
  for (std::size_t k = 0; k < coeffs.rows(); ++k) e[k] = norm2(coeffs.row(k));
  return e;
}

/// 1-D DCT along the token axis, independently for each embedding column.
inline SpectralStack dct_tokens(const Matrix& embeddings) {
  if (embeddings.rows() == 0 || embeddings.cols() == 0)
    throw DomainError("dct_tokens: embeddings must be non-empty");
  if (!all_finite(embeddings.data())) throw DomainError("dct_tokens: non-finite embedding entry");
  SpectralStack out;
  out.coeffs = matmul(dct_matrix(embeddings.rows()), embeddings);
  out.energy = row_energies(out.coeffs);
  return out;
}

inline Matrix idct_tokens(const Matrix& coeffs) {
  if (coeffs.rows() == 0 || coeffs.cols() == 0) throw DomainError("idct_tokens: empty coefficients");
  return matmul_tn(dct_matrix(coeffs.rows()), coeffs);
}

inline Matrix idct_tokens(const SpectralStack& stack) {
  if (stack.energy.size() != stack.coeffs.rows()) throw DomainError("idct_tokens: malformed stack");
  return idct_tokens(stack.coeffs);
}

/// Separable orthonormal 2-D DCT-II of an H x W plane.
inline Matrix dct2(const Matrix& plane) {
  if (plane.rows() == 0 || plane.cols() == 0) throw DomainError("dct2: empty plane");
  if (!all_finite(plane.data())) throw DomainError("dct2: non-finite entry");
  return matmul_nt(matmul(dct_matrix(plane.rows()), plane), dct_matrix(plane.cols()));
}

inline Matrix idct2(const Matrix& coeffs) {
  if (coeffs.rows() == 0 || coeffs.cols() == 0) throw DomainError("idct2: empty plane");
  if (!all_finite(coeffs.data())) throw DomainError("idct2: non-finite entry");
  return matmul(matmul_tn(dct_matrix(coeffs.rows()), coeffs), dct_matrix(coeffs.cols()));
}

/// d(u,v) = sqrt(u^2 + v^2) / sqrt(H^2 + W^2), without index checks.
inline double radial_distance_formula(double u, double v, double h, double w) {
  return std::sqrt(u * u + v * v) / std::sqrt(h * h + w * w);
}

/// Radial frequency distance on the H x W index grid; strictly below 1 there.
inline double radial_distance(std::size_t u, std::size_t v, std::size_t h, std::size_t w) {
  if (u >= h || v >= w) throw DomainError("radial_distance: index out of range");
  return radial_distance_formula(static_cast<double>(u), static_cast<double>(v), static_cast<double>(h),
                                 static_cast<double>(w));
}

// ---------------------------------------------------------------------------
// Gradient filters

enum class FilterKind { identity, polynomial, reciprocal, sigmoid, band_clip, top_k_sparse };

inline std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::identity: return "identity";
    case FilterKind::polynomial: return "polynomial";
    case FilterKind::reciprocal: return "reciprocal";
    case FilterKind::sigmoid: return "sigmoid";
    case FilterKind::band_clip: return "band-clip";
    case FilterKind::top_k_sparse: return "top-k-sparse";
  }
  return "?";
}

inline FilterKind parse_filter_kind(std::string_view name) {
  for (auto k : {FilterKind::identity, FilterKind::polynomial, FilterKind::reciprocal, FilterKind::sigmoid,
                 FilterKind::band_clip, FilterKind::top_k_sparse})
    if (to_string(k) == name) return k;
  throw DomainError("unknown filter kind '" + std::string(name) + "'");
}

/// Frequency-domain gradient filter. Only the fields relevant to `kind` are read.
struct RadialFilter {
  FilterKind kind = FilterKind::polynomial;
  double p = 1.5;                                 // polynomial: (1 - d)^p
  double beta = 2.0;                              // reciprocal: 1 / (1 + beta d); sigmoid slope
  double center = 0.5;                            // sigmoid: 1 / (1 + exp(beta (d - c)))
  double tau_low = 1.0 / 3.0;                     // band edges for band-clip / top-k-sparse
  double tau_high = 2.0 / 3.0;
  std::array<double, 3> gamma{1.5, 1.0, 0.5};     // band-clip: mu_B +- gamma_B sigma_B
  std::array<double, 3> keep_percent{50, 30, 30}; // top-k-sparse: K% retained per band

  static RadialFilter identity() { return {.kind = FilterKind::identity}; }
  static RadialFilter polynomial(double p) { return {.kind = FilterKind::polynomial, .p = p}; }
  static RadialFilter reciprocal(double beta) { return {.kind = FilterKind::reciprocal, .beta = beta}; }
  static RadialFilter sigmoid(double beta, double c) {
    return {.kind = FilterKind::sigmoid, .beta = beta, .center = c};
  }
  static RadialFilter band_clip() { return {.kind = FilterKind::band_clip}; }
  static RadialFilter top_k_sparse() { return {.kind = FilterKind::top_k_sparse}; }

  bool is_radial() const {
    return kind == FilterKind::polynomial || kind == FilterKind::reciprocal || kind == FilterKind::sigmoid;
  }

  void validate() const {
    switch (kind) {
      case FilterKind::identity: return;
      case FilterKind::polynomial:
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("polynomial filter requires p >= 0");
        return;
      case FilterKind::reciprocal:
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("reciprocal filter requires beta >= 0");
        return;
      case FilterKind::sigmoid:
        if (!(beta >= 0.0) || !std::isfinite(beta) || !std::isfinite(center))
          throw DomainError("sigmoid filter requires finite beta >= 0 and finite c");
        return;
      case FilterKind::band_clip:
      case FilterKind::top_k_sparse:
        if (!(tau_low > 0.0 && tau_low < tau_high && tau_high < 1.0))
          throw DomainError("band thresholds must satisfy 0 < tau_l < tau_h < 1");
        if (kind == FilterKind::band_clip) {
          for (double g : gamma)
            if (!(g >= 0.0) || !std::isfinite(g)) throw DomainError("band-clip gamma must be >= 0");
        } else {
          for (double k : keep_percent)
            if (!(k >= 0.0 && k <= 100.0)) throw DomainError("top-k-sparse K must lie in [0, 100]");
        }
        return;
    }
    throw DomainError("unknown filter kind");
  }

  /// phi(d) for the radial kinds; 1 for identity.
  double modulation(double d) const {
    switch (kind) {
      case FilterKind::identity: return 1.0;
      case FilterKind::polynomial: return std::pow(1.0 - d, p);
      case FilterKind::reciprocal: return 1.0 / (1.0 + beta * d);
      case FilterKind::sigmoid: return 1.0 / (1.0 + std::exp(beta * (d - center)));
      default: throw DomainError("modulation is defined only for radial filter kinds");
    }
  }

  /// 0 = low, 1 = mid, 2 = high.
  int band_of(double d) const { return d < tau_low ? 0 : (d < tau_high ? 1 : 2); }
};

/// Clips each band of a 2-D spectrum to mu_B +- gamma_B sigma_B (population statistics).
inline void clip_spectrum_bands(Matrix& spec, const RadialFilter& f) {
  const std::size_t h = spec.rows(), w = spec.cols();
  std::array<std::vector<std::size_t>, 3> members;
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) members[f.band_of(radial_distance(u, v, h, w))].push_back(u * w + v);
  auto& data = spec.data();
  for (int b = 0; b < 3; ++b) {
    const auto& idx = members[b];
    if (idx.empty()) continue;
    double mean = 0.0;
    for (auto i : idx) mean += data[i];
    mean /= static_cast<double>(idx.size());
    double var = 0.0;
    for (auto i : idx) var += (data[i] - mean) * (data[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(idx.size()));
    const double lo = mean - f.gamma[b] * sd, hi = mean + f.gamma[b] * sd;
    for (auto i : idx) data[i] = std::clamp(data[i], lo, hi);
  }
}

/// Keeps the ceil(K_B% of |B|) largest-magnitude coefficients of each band; ties go to the lower (u, v).
inline void sparsify_spectrum_bands(Matrix& spec, const RadialFilter& f) {
  const std::size_t h = spec.rows(), w = spec.cols();
  std::array<std::vector<std::size_t>, 3> members;  // ascending (u,v) lexicographic order
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) members[f.band_of(radial_distance(u, v, h, w))].push_back(u * w + v);
  auto& data = spec.data();
  for (int b = 0; b < 3; ++b) {
    auto idx = members[b];
    const auto keep = static_cast<std::size_t>(
        std::ceil(f.keep_percent[b] / 100.0 * static_cast<double>(idx.size()) - 1e-9));
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t c) { return std::abs(data[a]) > std::abs(data[c]); });
    for (std::size_t r = keep; r < idx.size(); ++r) data[idx[r]] = 0.0;
  }
}

/// Filters the spectrum of one H x W gradient plane and returns the spatial result.
inline Matrix filter_plane(const Matrix& plane, const RadialFilter& filter) {
  filter.validate();
  if (filter.kind == FilterKind::identity) return plane;
  if (!all_finite(plane.data())) throw DomainError("apply_fgr: non-finite gradient entry");
  const std::size_t h = plane.rows(), w = plane.cols();
  if (h * w == 1) return plane;  // lone DC coefficient

  Matrix spec = dct2(plane);
  switch (filter.kind) {
    case FilterKind::polynomial:
    case FilterKind::reciprocal:
    case FilterKind::sigmoid:
      for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) spec(u, v) *= filter.modulation(radial_distance(u, v, h, w));
      break;
    case FilterKind::band_clip: clip_spectrum_bands(spec, filter); break;
    case FilterKind::top_k_sparse: sparsify_spectrum_bands(spec, filter); break;
    case FilterKind::identity: break;
  }
  return idct2(spec);
}

/// FGR over a B x C x H x W gradient tensor, one plane per (batch, channel).
inline Tensor apply_fgr(const Tensor& gradient, const RadialFilter& filter) {
  if (gradient.rank() != 4) throw DomainError("apply_fgr: expected a B x C x H x W tensor");
  filter.validate();
  if (filter.kind == FilterKind::identity) return gradient;
  const std::size_t h = gradient.shape[2], w = gradient.shape[3];
  const std::size_t planes = gradient.shape[0] * gradient.shape[1];
  Tensor out = gradient;
  for (std::size_t p = 0; p < planes; ++p) {
    const auto first = gradient.data.begin() + static_cast<std::ptrdiff_t>(p * h * w);
    Matrix plane(h, w, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(h * w)));
    Matrix filtered = filter_plane(plane, filter);
    std::copy(filtered.data().begin(), filtered.data().end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(p * h * w));
  }
  return out;
}

/// FGR over an image-shaped gradient (a batch of one, channels as planes).
inline Image apply_fgr(const Image& gradient, const RadialFilter& filter) {
  filter.validate();
  if (filter.kind == FilterKind::identity) return gradient;
  Image out = gradient;
  for (std::size_t c = 0; c < gradient.channels(); ++c) out.set_plane(c, filter_plane(gradient.plane(c), filter));
  return out;
}

}  // namespace fra

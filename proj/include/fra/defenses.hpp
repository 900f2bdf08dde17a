#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <string_view>

#include "fra/spectral.hpp"
#include "fra/tensor.hpp"

namespace fra {

enum class DefenseKind { jpeg_like, gaussian, center_crop };

inline std::string_view to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::jpeg_like: return "jpeg-like";
    case DefenseKind::gaussian: return "gaussian";
    case DefenseKind::center_crop: return "center-crop";
  }
  return "?";
}

inline DefenseKind parse_defense_kind(std::string_view name) {
  for (auto k : {DefenseKind::jpeg_like, DefenseKind::gaussian, DefenseKind::center_crop})
    if (to_string(k) == name) return k;
  throw DomainError("unknown defense kind '" + std::string(name) + "'");
}

struct DefenseSpec {
  DefenseKind kind = DefenseKind::jpeg_like;
  int quality = 75;         // jpeg-like
  std::size_t kernel = 5;   // gaussian, odd
  double sigma = 0.5;       // gaussian
  double ratio = 0.9;       // center-crop, in (0, 1]

  static DefenseSpec jpeg(int quality = 75) { return {.kind = DefenseKind::jpeg_like, .quality = quality}; }
  static DefenseSpec gaussian(std::size_t kernel = 5, double sigma = 0.5) {
    return {.kind = DefenseKind::gaussian, .kernel = kernel, .sigma = sigma};
  }
  static DefenseSpec center_crop(double ratio = 0.9) { return {.kind = DefenseKind::center_crop, .ratio = ratio}; }

  /// Short label for reports, e.g. "jpeg-like:q75".
  std::string label() const {
    char buf[64];
    switch (kind) {
      case DefenseKind::jpeg_like: std::snprintf(buf, sizeof buf, "jpeg-like:q%d", quality); break;
      case DefenseKind::gaussian: std::snprintf(buf, sizeof buf, "gaussian:k%zu:s%g", kernel, sigma); break;
      case DefenseKind::center_crop: std::snprintf(buf, sizeof buf, "center-crop:r%g", ratio); break;
    }
    return buf;
  }

  void validate() const {
    switch (kind) {
      case DefenseKind::jpeg_like:
        if (quality < 1 || quality > 100) throw DomainError("jpeg-like quality must lie in [1, 100]");
        return;
      case DefenseKind::gaussian:
        if (kernel % 2 == 0) throw DomainError("gaussian kernel size must be odd");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("gaussian sigma must be > 0");
        return;
      case DefenseKind::center_crop:
        if (!(ratio > 0.0 && ratio <= 1.0)) throw DomainError("center-crop ratio must lie in (0, 1]");
        return;
    }
  }
};

// ---------------------------------------------------------------------------
// JPEG-style quantization (baseline luminance table, no entropy coding)

inline constexpr std::array<int, 64> kJpegLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,  //
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,  //
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,  //
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

/// Luminance table scaled for `quality` (IJG convention: 5000/q below 50, 200 - 2q otherwise).
inline std::array<int, 64> scaled_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw DomainError("jpeg quality must lie in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> t{};
  for (std::size_t i = 0; i < 64; ++i) t[i] = std::clamp((kJpegLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return t;
}

namespace detail {

inline Image jpeg_like(const Image& img, int quality) {
  const auto table = scaled_quant_table(quality);
  const std::size_t h = img.height(), w = img.width();
  const std::size_t ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;
  Image out = img;
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t by = 0; by < ph; by += 8)
      for (std::size_t bx = 0; bx < pw; bx += 8) {
        Matrix block(8, 8);
        for (std::size_t y = 0; y < 8; ++y)
          for (std::size_t x = 0; x < 8; ++x)
            block(y, x) = 255.0 * img(std::min(by + y, h - 1), std::min(bx + x, w - 1), c) - 128.0;
        Matrix coef = dct2(block);
        for (std::size_t i = 0; i < 64; ++i) {
          const double q = table[i];
          coef.data()[i] = std::round(coef.data()[i] / q) * q;
        }
        const Matrix rec = idct2(coef);
        for (std::size_t y = 0; y < 8 && by + y < h; ++y)
          for (std::size_t x = 0; x < 8 && bx + x < w; ++x)
            out(by + y, bx + x, c) = std::clamp((rec(y, x) + 128.0) / 255.0, 0.0, 1.0);
      }
  }
  return out;
}

inline Image gaussian(const Image& img, std::size_t size, double sigma);

}  // namespace detail

/// Normalized size x size Gaussian kernel.
inline Matrix gaussian_kernel(std::size_t size, double sigma) {
  if (size % 2 == 0) throw DomainError("gaussian kernel size must be odd");
  if (!(sigma > 0.0)) throw DomainError("gaussian sigma must be > 0");
  const auto r = static_cast<long>(size / 2);
  Matrix k(size, size);
  double total = 0.0;
  for (long y = -r; y <= r; ++y)
    for (long x = -r; x <= r; ++x) {
      const double v = std::exp(-static_cast<double>(x * x + y * y) / (2.0 * sigma * sigma));
      k(static_cast<std::size_t>(y + r), static_cast<std::size_t>(x + r)) = v;
      total += v;
    }
  for (auto& v : k.data()) v /= total;
  return k;
}

namespace detail {

inline Image gaussian(const Image& img, std::size_t size, double sigma) {
  const Matrix k = gaussian_kernel(size, sigma);
  const auto r = static_cast<long>(size / 2);
  const auto h = static_cast<long>(img.height()), w = static_cast<long>(img.width());
  Image out(img.height(), img.width(), img.channels());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) {
        double s = 0.0;
        for (long dy = -r; dy <= r; ++dy)
          for (long dx = -r; dx <= r; ++dx) {
            const auto sy = static_cast<std::size_t>(std::clamp(y + dy, 0L, h - 1));
            const auto sx = static_cast<std::size_t>(std::clamp(x + dx, 0L, w - 1));
            s += k(static_cast<std::size_t>(dy + r), static_cast<std::size_t>(dx + r)) * img(sy, sx, c);
          }
        out(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = std::clamp(s, 0.0, 1.0);
      }
  return out;
}

// Bilinear sample of the crop window at half-pixel-centered coordinates:
// src = (dst + 0.5) * crop / full - 0.5, clamped to [0, crop - 1].
inline Image center_crop(const Image& img, double ratio) {
  const std::size_t h = img.height(), w = img.width();
  const auto ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(h))));
  const auto cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(w))));
  const std::size_t top = (h - ch) / 2, left = (w - cw) / 2;
  auto source_coord = [](std::size_t dst, std::size_t crop, std::size_t full) {
    const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(crop) / static_cast<double>(full) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(crop - 1));
  };
  Image out(h, w, img.channels());
  for (std::size_t y = 0; y < h; ++y) {
    const double sy = source_coord(y, ch, h);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, ch - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double sx = source_coord(x, cw, w);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, cw - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels(); ++c) {
        const double a = img(top + y0, left + x0, c), b = img(top + y0, left + x1, c);
        const double d = img(top + y1, left + x0, c), e = img(top + y1, left + x1, c);
        const double v = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
        out(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Applies an input-space defense; output has the input's shape and lies in [0, 1].
inline Image defend(const Image& image, const DefenseSpec& spec) {
  spec.validate();
  if (image.size() == 0) throw DomainError("defend: empty image");
  switch (spec.kind) {
    case DefenseKind::jpeg_like: return detail::jpeg_like(image, spec.quality);
    case DefenseKind::gaussian: return detail::gaussian(image, spec.kernel, spec.sigma);
    case DefenseKind::center_crop: return detail::center_crop(image, spec.ratio);
  }
  throw DomainError("defend: unknown kind");
}

}  // namespace fra

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "fra/encoders.hpp"
#include "fra/rng.hpp"
#include "fra/tensor.hpp"

namespace fra {

/// Default two-member surrogate ensemble (heterogeneous patch size, width and seed).
inline std::vector<EncoderSpec> default_ensemble() {
  return {{.kind = EncoderKind::attention_1layer, .patch_size = 4, .embed_dim = 32, .seed = 11},
          {.kind = EncoderKind::attention_1layer, .patch_size = 2, .embed_dim = 16, .seed = 22}};
}

/// Default held-out encoder; its seed is disjoint from default_ensemble().
inline EncoderSpec default_holdout() {
  return {.kind = EncoderKind::attention_1layer, .patch_size = 4, .embed_dim = 24, .seed = 1001};
}

/// Seeded structured test image: smooth color gradient, a few soft blobs, an
/// oriented grating and light noise, clamped to [0, 1].
inline Image synthetic_image(std::uint64_t seed, std::size_t h = 32, std::size_t w = 32, std::size_t c = 3) {
  Xorshift64Star rng(seed);
  Image img(h, w, c);
  std::vector<double> base(c), gx(c), gy(c);
  for (std::size_t k = 0; k < c; ++k) {
    base[k] = rng.uniform(0.2, 0.8);
    gx[k] = rng.uniform(-0.3, 0.3);
    gy[k] = rng.uniform(-0.3, 0.3);
  }
  struct Blob {
    double cy, cx, r;
    std::vector<double> color;
  };
  std::vector<Blob> blobs(3);
  for (auto& b : blobs) {
    b.cy = rng.uniform(0.0, static_cast<double>(h));
    b.cx = rng.uniform(0.0, static_cast<double>(w));
    b.r = rng.uniform(2.0, static_cast<double>(std::min(h, w)) / 3.0);
    b.color.resize(c);
    for (auto& v : b.color) v = rng.uniform(-0.5, 0.5);
  }
  const double freq = rng.uniform(0.15, 0.6), angle = rng.uniform(0.0, std::numbers::pi), amp = rng.uniform(0.0, 0.15);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / static_cast<double>(h) - 0.5;
      const double fx = static_cast<double>(x) / static_cast<double>(w) - 0.5;
      const double grating = amp * std::sin(freq * (ca * static_cast<double>(x) + sa * static_cast<double>(y)));
      for (std::size_t k = 0; k < c; ++k) {
        double v = base[k] + gx[k] * fx + gy[k] * fy + grating;
        for (const auto& b : blobs) {
          const double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
          v += b.color[k] * std::exp(-(dy * dy + dx * dx) / (2.0 * b.r * b.r));
        }
        v += rng.uniform(-0.02, 0.02);
        img(y, x, k) = std::clamp(v, 0.0, 1.0);
      }
    }
  return img;
}

/// Source/target pair `index` of the synthetic benchmark rooted at `master_seed`.
inline std::pair<Image, Image> synthetic_pair(std::uint64_t master_seed, std::size_t index, std::size_t h = 32,
                                              std::size_t w = 32, std::size_t c = 3) {
  const std::uint64_t s = derive_seed(master_seed, index);
  return {synthetic_image(derive_seed(s, 0), h, w, c), synthetic_image(derive_seed(s, 1), h, w, c)};
}

}  // namespace fra

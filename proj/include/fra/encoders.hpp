#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fra/rng.hpp"
#include "fra/tensor.hpp"

namespace fra {

enum class EncoderKind { linear_patch, attention_1layer };

inline std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::linear_patch ? "linear-patch" : "attention-1layer";
}

inline EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "linear-patch") return EncoderKind::linear_patch;
  if (name == "attention-1layer") return EncoderKind::attention_1layer;
  throw DomainError("unknown encoder kind '" + std::string(name) + "'");
}

struct EncoderSpec {
  EncoderKind kind = EncoderKind::attention_1layer;
  std::size_t patch_size = 4;
  std::size_t embed_dim = 32;
  std::uint64_t seed = 1;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  bool bias = false;  // seeded bias on the patch embedding

  std::size_t grid_rows() const { return height / patch_size; }
  std::size_t grid_cols() const { return width / patch_size; }
  std::size_t patch_count() const { return grid_rows() * grid_cols(); }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  void validate() const {
    if (patch_size == 0 || embed_dim == 0 || channels == 0) throw DomainError("encoder: sizes must be positive");
    if (height == 0 || width == 0 || height % patch_size != 0 || width % patch_size != 0)
      throw DomainError("encoder: input " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by patch size " + std::to_string(patch_size));
  }

  bool operator==(const EncoderSpec&) const = default;
};

/// Forward-pass record kept for the backward pass.
struct EncoderCache {
  Matrix patches_in;  // P x (patch^2 C)
  Matrix embedded;    // E0 = patches_in W_e^T (+ b)
  Matrix q, k, v;     // attention only
  Matrix attn;        // row-stochastic P x P
  Matrix mixed;       // attn v
};

struct EncoderOutput {
  std::vector<double> global_feature;  // d
  Matrix patches;                      // P x d
  EncoderCache cache;
};

/// Seeded toy vision encoder.
///
/// linear-patch:      E = X W_e^T (+ b),                       g = W_p mean(E)
/// attention-1layer:  E0 = X W_e^T (+ b),
///                    A = softmax(E0 W_q (E0 W_k)^T / sqrt(d)),
///                    E = E0 + A (E0 W_v) W_o,                  g = W_p mean(E)
///
/// X holds one flattened patch per row (pixel-major, channel-fastest), patches
/// in row-major grid order. Weights are uniform(-s, s), s = 1/sqrt(fan_in),
/// drawn from Xorshift64Star(seed) in the order W_e, b, W_q, W_k, W_v, W_o, W_p
/// (b only when enabled; the four attention matrices only for attention-1layer).
class Encoder {
 public:
  explicit Encoder(const EncoderSpec& spec) : spec_(spec) {
    spec_.validate();
    Xorshift64Star rng(spec_.seed);
    const std::size_t d = spec_.embed_dim, m = spec_.patch_dim();
    embed_ = random_matrix(rng, d, m, m);
    if (spec_.bias) bias_ = random_matrix(rng, 1, d, m).data();
    else bias_.assign(d, 0.0);
    if (spec_.kind == EncoderKind::attention_1layer) {
      wq_ = random_matrix(rng, d, d, d);
      wk_ = random_matrix(rng, d, d, d);
      wv_ = random_matrix(rng, d, d, d);
      wo_ = random_matrix(rng, d, d, d);
    }
    pool_ = random_matrix(rng, d, d, d);
  }

  const EncoderSpec& spec() const { return spec_; }
  const Matrix& embedding_weights() const { return embed_; }
  const std::vector<double>& bias() const { return bias_; }
  const Matrix& query_weights() const { return wq_; }
  const Matrix& key_weights() const { return wk_; }
  const Matrix& value_weights() const { return wv_; }
  const Matrix& output_weights() const { return wo_; }
  const Matrix& pool_weights() const { return pool_; }

  EncoderOutput forward(const Image& image) const {
    check_image(image);
    const std::size_t d = spec_.embed_dim;
    EncoderOutput out;
    auto& c = out.cache;
    c.patches_in = extract_patches(image);
    c.embedded = matmul_nt(c.patches_in, embed_);
    for (std::size_t r = 0; r < c.embedded.rows(); ++r)
      for (std::size_t j = 0; j < d; ++j) c.embedded(r, j) += bias_[j];

    if (spec_.kind == EncoderKind::linear_patch) {
      out.patches = c.embedded;
    } else {
      c.q = matmul(c.embedded, wq_);
      c.k = matmul(c.embedded, wk_);
      c.v = matmul(c.embedded, wv_);
      c.attn = matmul_nt(c.q, c.k);
      const double scale = 1.0 / std::sqrt(static_cast<double>(d));
      for (std::size_t i = 0; i < c.attn.rows(); ++i) softmax_row(c.attn.row(i), scale);
      c.mixed = matmul(c.attn, c.v);
      out.patches = c.embedded;
      const Matrix projected = matmul(c.mixed, wo_);
      for (std::size_t i = 0; i < out.patches.size(); ++i) out.patches.data()[i] += projected.data()[i];
    }

    const std::vector<double> mean = column_mean(out.patches);
    out.global_feature.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) out.global_feature[i] = dot(pool_.row(i), mean);
    return out;
  }

  /// dL/d image given dL/d global_feature and dL/d patches for the pass recorded in `out`.
  Image input_gradient(const EncoderOutput& out, std::span<const double> d_global, const Matrix& d_patches) const {
    const std::size_t d = spec_.embed_dim, p = spec_.patch_count();
    if (d_global.size() != d) throw DomainError("input_gradient: global adjoint has wrong length");
    if (d_patches.rows() != p || d_patches.cols() != d)
      throw DomainError("input_gradient: patch adjoint has wrong shape");
    const auto& c = out.cache;
    if (c.patches_in.rows() != p) throw DomainError("input_gradient: cache does not belong to this encoder");

    // pooling: g = W_p mean(E)
    Matrix d_out = d_patches;
    std::vector<double> d_mean(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) d_mean[j] += pool_(i, j) * d_global[i];
    const double inv_p = 1.0 / static_cast<double>(p);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t j = 0; j < d; ++j) d_out(r, j) += inv_p * d_mean[j];

    Matrix d_embedded = d_out;  // residual / identity path
    if (spec_.kind == EncoderKind::attention_1layer) {
      const Matrix d_mixed = matmul_nt(d_out, wo_);
      const Matrix d_attn = matmul_nt(d_mixed, c.v);
      const Matrix d_v = matmul_tn(c.attn, d_mixed);
      const double scale = 1.0 / std::sqrt(static_cast<double>(d));
      Matrix d_scores(p, p);
      for (std::size_t i = 0; i < p; ++i) {
        const double inner = dot(d_attn.row(i), c.attn.row(i));
        for (std::size_t j = 0; j < p; ++j) d_scores(i, j) = c.attn(i, j) * (d_attn(i, j) - inner) * scale;
      }
      const Matrix d_q = matmul(d_scores, c.k);
      const Matrix d_k = matmul_tn(d_scores, c.q);
      for (const auto& [grad, weights] : {std::pair{&d_q, &wq_}, std::pair{&d_k, &wk_}, std::pair{&d_v, &wv_}}) {
        const Matrix back = matmul_nt(*grad, *weights);
        for (std::size_t i = 0; i < back.size(); ++i) d_embedded.data()[i] += back.data()[i];
      }
    }

    const Matrix d_patches_in = matmul(d_embedded, embed_);
    return scatter_patches(d_patches_in);
  }

  Matrix extract_patches(const Image& image) const {
    const std::size_t ps = spec_.patch_size, ch = spec_.channels, gc = spec_.grid_cols();
    Matrix x(spec_.patch_count(), spec_.patch_dim());
    for (std::size_t q = 0; q < x.rows(); ++q) {
      const std::size_t y0 = (q / gc) * ps, x0 = (q % gc) * ps;
      std::size_t col = 0;
      for (std::size_t py = 0; py < ps; ++py)
        for (std::size_t px = 0; px < ps; ++px)
          for (std::size_t k = 0; k < ch; ++k) x(q, col++) = image(y0 + py, x0 + px, k);
    }
    return x;
  }

  Image scatter_patches(const Matrix& x) const {
    const std::size_t ps = spec_.patch_size, ch = spec_.channels, gc = spec_.grid_cols();
    Image img(spec_.height, spec_.width, ch);
    for (std::size_t q = 0; q < x.rows(); ++q) {
      const std::size_t y0 = (q / gc) * ps, x0 = (q % gc) * ps;
      std::size_t col = 0;
      for (std::size_t py = 0; py < ps; ++py)
        for (std::size_t px = 0; px < ps; ++px)
          for (std::size_t k = 0; k < ch; ++k) img(y0 + py, x0 + px, k) = x(q, col++);
    }
    return img;
  }

 private:
  static Matrix random_matrix(Xorshift64Star& rng, std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (auto& w : m.data()) w = rng.uniform(-s, s);
    return m;
  }

  static void softmax_row(std::span<double> row, double scale) {
    double mx = -INFINITY;
    for (auto& x : row) {
      x *= scale;
      mx = std::max(mx, x);
    }
    double sum = 0.0;
    for (auto& x : row) sum += (x = std::exp(x - mx));
    for (auto& x : row) x /= sum;
  }

  static std::vector<double> column_mean(const Matrix& m) {
    std::vector<double> mean(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += m(r, j);
    for (auto& x : mean) x /= static_cast<double>(m.rows());
    return mean;
  }

  void check_image(const Image& image) const {
    if (image.height() != spec_.height || image.width() != spec_.width || image.channels() != spec_.channels)
      throw DomainError("encoder: image is " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                        "x" + std::to_string(image.channels()) + ", expected " + std::to_string(spec_.height) + "x" +
                        std::to_string(spec_.width) + "x" + std::to_string(spec_.channels));
    if (!all_finite(image.data())) throw DomainError("encoder: non-finite pixel");
  }

  EncoderSpec spec_;
  Matrix embed_;              // d x patch_dim
  std::vector<double> bias_;  // d
  Matrix wq_, wk_, wv_, wo_;  // d x d, right-multiplied
  Matrix pool_;               // d x d
};

inline EncoderOutput forward(const EncoderSpec& spec, const Image& image) { return Encoder(spec).forward(image); }

inline Image input_gradient(const EncoderSpec& spec, const Image& image, std::span<const double> d_global,
                            const Matrix& d_patches) {
  const Encoder enc(spec);
  return enc.input_gradient(enc.forward(image), d_global, d_patches);
}

}  // namespace fra

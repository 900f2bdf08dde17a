#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fra/encoders.hpp"
#include "fra/gradcheck.hpp"
#include "oracles.hpp"

using namespace fra;

namespace {

EncoderSpec linear_spec(std::uint64_t seed = 5) {
  return {.kind = EncoderKind::linear_patch, .patch_size = 4, .embed_dim = 16, .seed = seed};
}

EncoderSpec attention_spec(std::uint64_t seed = 7) {
  return {.kind = EncoderKind::attention_1layer, .patch_size = 4, .embed_dim = 32, .seed = seed};
}

// Straightforward loop re-implementation of the attention forward formulas.
struct NaiveOutput {
  std::vector<double> global;
  std::vector<std::vector<double>> tokens;
};

NaiveOutput naive_attention_forward(const Encoder& enc, const Image& img) {
  const auto& sp = enc.spec();
  const std::size_t d = sp.embed_dim, ps = sp.patch_size, gc = sp.width / ps, p = sp.patch_count();
  std::vector<std::vector<double>> e0(p, std::vector<double>(d, 0.0));
  for (std::size_t q = 0; q < p; ++q) {
    const std::size_t gy = q / gc, gx = q % gc;
    for (std::size_t r = 0; r < d; ++r) {
      double s = enc.bias()[r];
      std::size_t col = 0;
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x)
          for (std::size_t c = 0; c < sp.channels; ++c)
            s += enc.embedding_weights()(r, col++) * img(gy * ps + y, gx * ps + x, c);
      e0[q][r] = s;
    }
  }
  auto project = [&](const Matrix& w) {
    std::vector<std::vector<double>> out(p, std::vector<double>(d, 0.0));
    for (std::size_t q = 0; q < p; ++q)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < d; ++i) out[q][j] += e0[q][i] * w(i, j);
    return out;
  };
  const auto qm = project(enc.query_weights()), km = project(enc.key_weights()), vm = project(enc.value_weights());
  NaiveOutput out;
  out.tokens = e0;
  for (std::size_t a = 0; a < p; ++a) {
    std::vector<double> score(p);
    double mx = -1e300;
    for (std::size_t b = 0; b < p; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += qm[a][i] * km[b][i];
      score[b] = s / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, score[b]);
    }
    double z = 0.0;
    for (auto& s : score) z += (s = std::exp(s - mx));
    std::vector<double> mixed(d, 0.0);
    for (std::size_t b = 0; b < p; ++b)
      for (std::size_t i = 0; i < d; ++i) mixed[i] += score[b] / z * vm[b][i];
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < d; ++i) out.tokens[a][j] += mixed[i] * enc.output_weights()(i, j);
  }
  std::vector<double> mean(d, 0.0);
  for (const auto& t : out.tokens)
    for (std::size_t j = 0; j < d; ++j) mean[j] += t[j] / static_cast<double>(p);
  out.global.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t j = 0; j < d; ++j) out.global[r] += enc.pool_weights()(r, j) * mean[j];
  return out;
}

}  // namespace

TEST(Encoder, ZeroImageGivesZeroOutputForLinearPatch) {
  const auto out = forward(linear_spec(), Image(32, 32, 3));
  for (double v : out.patches.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.global_feature) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, LinearPatchIsLocal) {
  Image a = oracle::random_image(11, 32, 32, 3), b = a;
  // patch (1, 2) in an 8x8 grid -> row 10
  b(5, 9, 1) += 0.25;
  b(6, 11, 0) -= 0.1;
  const Encoder enc(linear_spec());
  const auto oa = enc.forward(a), ob = enc.forward(b);
  for (std::size_t q = 0; q < oa.patches.rows(); ++q) {
    const double diff = max_abs_diff(oa.patches.row(q), ob.patches.row(q));
    if (q == 10) EXPECT_GT(diff, 0.0);
    else EXPECT_EQ(diff, 0.0) << "row " << q;
  }
}

TEST(Encoder, AttentionMatchesNaiveReimplementation) {
  for (bool bias : {false, true}) {
    EncoderSpec spec = attention_spec();
    spec.bias = bias;
    const Encoder enc(spec);
    const Image img = oracle::random_image(21, 32, 32, 3);
    const auto out = enc.forward(img);
    const auto ref = naive_attention_forward(enc, img);
    for (std::size_t q = 0; q < out.patches.rows(); ++q)
      for (std::size_t j = 0; j < spec.embed_dim; ++j) EXPECT_NEAR(out.patches(q, j), ref.tokens[q][j], 1e-10);
    for (std::size_t j = 0; j < spec.embed_dim; ++j) EXPECT_NEAR(out.global_feature[j], ref.global[j], 1e-10);
  }
}

TEST(Encoder, RejectsMismatchedImage) {
  const Encoder enc(linear_spec());
  EXPECT_THROW(enc.forward(Image(32, 28, 3)), DomainError);
  EXPECT_THROW(enc.forward(Image(32, 32, 1)), DomainError);
  Image bad(32, 32, 3);
  bad(0, 0, 0) = NAN;
  EXPECT_THROW(enc.forward(bad), DomainError);
}

TEST(Encoder, RejectsIndivisibleSpec) {
  EncoderSpec s = linear_spec();
  s.height = 30;
  EXPECT_THROW(Encoder{s}, DomainError);
  s = linear_spec();
  s.patch_size = 0;
  EXPECT_THROW(Encoder{s}, DomainError);
}

TEST(Encoder, ZeroAdjointsGiveZeroGradient) {
  for (const auto& spec : {linear_spec(), attention_spec()}) {
    const Image img = oracle::random_image(31, 32, 32, 3);
    const Image g = input_gradient(spec, img, std::vector<double>(spec.embed_dim, 0.0),
                                   Matrix(spec.patch_count(), spec.embed_dim));
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Encoder, OneHotPatchAdjointHasPatchSupport) {
  const EncoderSpec spec = linear_spec();
  Matrix adj(spec.patch_count(), spec.embed_dim);
  adj(13, 4) = 1.0;  // grid cell (1, 5)
  const Image g = input_gradient(spec, oracle::random_image(41, 32, 32, 3), std::vector<double>(spec.embed_dim, 0.0), adj);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const bool inside = y / 4 == 1 && x / 4 == 5;
        if (!inside) {
          EXPECT_EQ(g(y, x, c), 0.0);
        }
      }
  double inside_mass = 0.0;
  for (std::size_t y = 4; y < 8; ++y)
    for (std::size_t x = 20; x < 24; ++x)
      for (std::size_t c = 0; c < 3; ++c) inside_mass += std::abs(g(y, x, c));
  EXPECT_GT(inside_mass, 0.0);
}

TEST(Encoder, AdjointShapeMismatchRejected) {
  const Encoder enc(attention_spec());
  const auto out = enc.forward(oracle::random_image(1, 32, 32, 3));
  EXPECT_THROW(enc.input_gradient(out, std::vector<double>(31, 0.0), Matrix(64, 32)), DomainError);
  EXPECT_THROW(enc.input_gradient(out, std::vector<double>(32, 0.0), Matrix(63, 32)), DomainError);
}

// A linear functional of the outputs checks the backward pass directly.
TEST(Encoder, BackwardMatchesFiniteDifferencesOfLinearFunctional) {
  for (const auto& spec : {linear_spec(), attention_spec()}) {
    const Encoder enc(spec);
    const Matrix a = oracle::random_matrix(51, 1, spec.embed_dim);
    const Matrix b = oracle::random_matrix(52, spec.patch_count(), spec.embed_dim);
    auto functional = [&](const Image& x) {
      const auto out = enc.forward(x);
      return dot(a.row(0), out.global_feature) + dot(b.data(), out.patches.data());
    };
    const Image img = oracle::random_image(53, 32, 32, 3);
    const Image g = enc.input_gradient(enc.forward(img), a.row(0), b);
    const auto coords = sample_coordinates(img.size(), 200, 54);
    const auto rep = check_gradient(functional, img, g, coords);
    EXPECT_TRUE(rep.passed) << to_string(spec.kind) << " max rel " << rep.max_rel_error;
  }
}

TEST(Encoder, CompositeLossGradientMatchesFiniteDifferences) {
  for (const auto& spec : {linear_spec(), attention_spec()}) {
    AttackConfig config;
    const std::vector<EncoderSpec> ensemble{spec};
    const Image src = oracle::random_image(61, 32, 32, 3), tgt = oracle::random_image(62, 32, 32, 3);
    const Surrogates s = prepare_surrogates(ensemble, tgt, config);
    const std::vector<double> w{1.0};
    const auto rep = check_composite_gradient(src, s, config, w, 200, 63);
    EXPECT_TRUE(rep.passed) << to_string(spec.kind) << " max rel " << rep.max_rel_error << " small-abs "
                            << rep.max_abs_error_small;
    EXPECT_EQ(rep.checked, 200u);
  }
}

TEST(Encoder, DeterministicWeightsAndOutputs) {
  const Encoder a(attention_spec(9)), b(attention_spec(9)), c(attention_spec(10));
  EXPECT_EQ(a.embedding_weights(), b.embedding_weights());
  EXPECT_EQ(a.pool_weights(), b.pool_weights());
  EXPECT_FALSE(a.embedding_weights() == c.embedding_weights());
  const Image img = oracle::random_image(71, 32, 32, 3);
  const auto oa = a.forward(img), ob = b.forward(img);
  EXPECT_EQ(oa.patches, ob.patches);
  EXPECT_EQ(oa.global_feature, ob.global_feature);
  const Matrix adj = oracle::random_matrix(72, 64, 32);
  const std::vector<double> dg(32, 0.5);
  EXPECT_EQ(a.input_gradient(oa, dg, adj).data(), b.input_gradient(ob, dg, adj).data());
}

TEST(Encoder, WeightsFollowDocumentedDrawOrder) {
  const EncoderSpec spec = linear_spec(123);
  const Encoder enc(spec);
  Xorshift64Star rng(123);
  const double s = 1.0 / std::sqrt(48.0);
  for (double w : enc.embedding_weights().data()) ASSERT_EQ(w, rng.uniform(-s, s));
  const double sp = 1.0 / std::sqrt(16.0);
  for (double w : enc.pool_weights().data()) ASSERT_EQ(w, rng.uniform(-sp, sp));
}

TEST(Encoder, LinearPatchIsLinear) {
  const Encoder enc(linear_spec());
  const Image x = oracle::random_image(81, 32, 32, 3), y = oracle::random_image(82, 32, 32, 3);
  const double alpha = 0.7, beta = -1.3;
  Image mix(32, 32, 3);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = alpha * x.data()[i] + beta * y.data()[i];
  const auto om = enc.forward(mix), ox = enc.forward(x), oy = enc.forward(y);
  for (std::size_t i = 0; i < om.patches.size(); ++i)
    EXPECT_NEAR(om.patches.data()[i], alpha * ox.patches.data()[i] + beta * oy.patches.data()[i], 1e-10);
  for (std::size_t i = 0; i < om.global_feature.size(); ++i)
    EXPECT_NEAR(om.global_feature[i], alpha * ox.global_feature[i] + beta * oy.global_feature[i], 1e-10);
}

TEST(Encoder, DoublingSidesQuadruplesPatchCount) {
  EncoderSpec s = attention_spec();
  const std::size_t p = s.patch_count();
  s.height *= 2;
  s.width *= 2;
  EXPECT_EQ(s.patch_count(), 4 * p);
  const auto out = forward(s, oracle::random_image(91, 64, 64, 3));
  EXPECT_EQ(out.patches.rows(), 4 * p);
}

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fra/alignment.hpp"
#include "fra/encoders.hpp"
#include "fra/spectral.hpp"
#include "fra/tensor.hpp"

namespace fra {

struct PairRecord {
  double sim_adv_target = 0.0;
  double sim_adv_source = 0.0;
  bool success = false;  // sim_adv_target > sim_adv_source
};

struct TransferReport {
  std::vector<PairRecord> per_pair;
  double mean_sim = 0.0;      // mean of sim_adv_target
  double success_rate = 0.0;  // fraction of successful pairs
};

inline TransferReport summarize(std::vector<PairRecord> records) {
  TransferReport r;
  r.per_pair = std::move(records);
  if (r.per_pair.empty()) return r;
  std::size_t wins = 0;
  for (const auto& p : r.per_pair) {
    r.mean_sim += p.sim_adv_target;
    wins += p.success ? 1 : 0;
  }
  const auto n = static_cast<double>(r.per_pair.size());
  r.mean_sim /= n;
  r.success_rate = static_cast<double>(wins) / n;
  return r;
}

inline void check_holdout_disjoint(const EncoderSpec& holdout, std::span<const EncoderSpec> ensemble) {
  for (const auto& s : ensemble)
    if (s.seed == holdout.seed)
      throw DomainError("holdout encoder seed " + std::to_string(holdout.seed) + " collides with a surrogate seed");
}

/// Global-feature cosine similarities of the adversarial image to target and source under a held-out encoder.
inline PairRecord holdout_similarity(const Encoder& holdout, const Image& adversarial, const Image& source,
                                     const Image& target) {
  const auto ga = holdout.forward(adversarial).global_feature;
  PairRecord r;
  r.sim_adv_target = cosine_similarity(ga, holdout.forward(target).global_feature);
  r.sim_adv_source = cosine_similarity(ga, holdout.forward(source).global_feature);
  r.success = r.sim_adv_target > r.sim_adv_source;
  return r;
}

inline PairRecord holdout_similarity(const Image& adversarial, const Image& source, const Image& target,
                                     const EncoderSpec& holdout, std::span<const EncoderSpec> ensemble = {}) {
  check_holdout_disjoint(holdout, ensemble);
  return holdout_similarity(Encoder(holdout), adversarial, source, target);
}

/// Per-patch energy of the top-n high-frequency token content, on the patch grid, scaled to [0, 1].
inline Matrix energy_map(const Image& image, const EncoderSpec& spec, std::size_t theta, std::size_t n) {
  const Encoder enc(spec);
  const auto out = enc.forward(image);
  SpectralStack stack = dct_tokens(out.patches);
  const auto sel = select_high_freq(stack, theta, n);
  Matrix kept(stack.coeffs.rows(), stack.coeffs.cols());
  for (std::size_t a = 0; a < sel.indices.size(); ++a) {
    auto src = sel.features.row(a);
    std::copy(src.begin(), src.end(), kept.row(sel.indices[a]).begin());
  }
  const Matrix tokens = idct_tokens(kept);

  Matrix map(spec.grid_rows(), spec.grid_cols());
  double mx = 0.0;
  for (std::size_t q = 0; q < tokens.rows(); ++q) {
    const double e = dot(tokens.row(q), tokens.row(q));
    map.data()[q] = e;
    mx = std::max(mx, e);
  }
  // content at rounding level of the token energy counts as zero
  const double total = dot(out.patches.data(), out.patches.data());
  if (mx <= 1e-24 * total) {
    std::fill(map.data().begin(), map.data().end(), 0.0);
    return map;
  }
  for (auto& v : map.data()) v /= mx;
  return map;
}

}  // namespace fra

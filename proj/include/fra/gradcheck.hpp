#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fra/attack.hpp"
#include "fra/rng.hpp"
#include "fra/tensor.hpp"

namespace fra {

struct GradCheckOptions {
  double h = 1e-4;           // central-difference step
  double rel_tol = 1e-4;
  double small = 1e-8;       // below this |analytic| the absolute test applies
  double abs_tol = 1e-7;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t absolute_checks = 0;
  double max_rel_error = 0.0;
  double max_abs_error_small = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

/// `count` distinct flat indices in [0, total), ascending.
inline std::vector<std::size_t> sample_coordinates(std::size_t total, std::size_t count, std::uint64_t seed) {
  if (count > total) throw DomainError("sample_coordinates: more samples than coordinates");
  Xorshift64Star rng(seed);
  std::vector<std::size_t> all(total);
  for (std::size_t i = 0; i < total; ++i) all[i] = i;
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.below(total - i)]);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

/// Compares `analytic` with central differences of `loss` at the given coordinates of `x`.
template <class LossFn>
GradCheckReport check_gradient(LossFn&& loss, Image x, const Image& analytic, std::span<const std::size_t> coords,
                               const GradCheckOptions& opts = {}) {
  if (!x.same_shape(analytic)) throw DomainError("check_gradient: gradient shape differs from input");
  GradCheckReport r;
  for (std::size_t i : coords) {
    const double keep = x.data()[i];
    x.data()[i] = keep + opts.h;
    const double up = loss(x);
    x.data()[i] = keep - opts.h;
    const double down = loss(x);
    x.data()[i] = keep;
    const double numeric = (up - down) / (2.0 * opts.h);
    const double a = analytic.data()[i];
    ++r.checked;
    if (std::abs(a) < opts.small) {
      ++r.absolute_checks;
      const double err = std::abs(a - numeric);
      r.max_abs_error_small = std::max(r.max_abs_error_small, err);
      if (err > opts.abs_tol) r.passed = false;
      continue;
    }
    const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = i;
    }
    if (rel > opts.rel_tol) r.passed = false;
  }
  return r;
}

/// Weighted frozen-plan composite sum_j W_j L~_j(image), with selections and plans from `at`.
inline double frozen_composite_loss(const Image& image, const Surrogates& s, const AttackConfig& config,
                                    const CompositeGradient& at) {
  double total = 0.0;
  for (std::size_t j = 0; j < s.encoders.size(); ++j) {
    const auto out = s.encoders[j].forward(image);
    total += at.weights[j] * frozen_plan_loss(out.global_feature, out.patches, s.targets[j], at.terms[j], config.align);
  }
  return total;
}

/// Gradient check of the full composite loss for one (source, target) pair at `image`.
inline GradCheckReport check_composite_gradient(const Image& image, const Surrogates& s, const AttackConfig& config,
                                                std::span<const double> weights, std::size_t samples,
                                                std::uint64_t seed, const GradCheckOptions& opts = {}) {
  const CompositeGradient cg = composite_gradient(image, s, config, weights);
  const auto coords = sample_coordinates(image.size(), samples, seed);
  return check_gradient([&](const Image& x) { return frozen_composite_loss(x, s, config, cg); }, image, cg.gradient,
                        coords, opts);
}

}  // namespace fra

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fra/spectral.hpp"
#include "fra/tensor.hpp"

namespace fra {

/// Top-n most energetic DCT rows at or above the frequency threshold.
struct HighFreqSelection {
  std::vector<std::size_t> indices;  // ascending
  Matrix features;                   // n x d, row a = coeffs.row(indices[a])
};

inline HighFreqSelection select_high_freq(const SpectralStack& stack, std::size_t theta, std::size_t n) {
  const std::size_t p = stack.tokens();
  if (stack.energy.size() != p) throw DomainError("select_high_freq: malformed spectral stack");
  if (theta < 1 || theta >= p)
    throw DomainError("select_high_freq: theta must satisfy 1 <= theta < P (theta=" + std::to_string(theta) +
                      ", P=" + std::to_string(p) + ")");
  if (n < 1 || n > p - theta)
    throw DomainError("select_high_freq: n must satisfy 1 <= n <= P - theta (n=" + std::to_string(n) +
                      ", P-theta=" + std::to_string(p - theta) + ")");

  std::vector<std::size_t> candidates(p - theta);
  std::iota(candidates.begin(), candidates.end(), theta);
  // Ties resolve toward the lower index.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return stack.energy[a] > stack.energy[b]; });
  candidates.resize(n);
  std::sort(candidates.begin(), candidates.end());

  HighFreqSelection sel;
  sel.indices = candidates;
  sel.features = Matrix(n, stack.coeffs.cols());
  for (std::size_t a = 0; a < n; ++a) {
    auto src = stack.coeffs.row(candidates[a]);
    std::copy(src.begin(), src.end(), sel.features.row(a).begin());
  }
  return sel;
}

/// Unit vector along `v`; a zero vector becomes the uniform unit vector (with a warning).
inline std::vector<double> normalized_or_uniform(std::span<const double> v, Diagnostics* diag,
                                                 const std::string& what) {
  std::vector<double> out(v.begin(), v.end());
  const double nrm = norm2(v);
  if (nrm == 0.0) {
    warn(diag, what + ": zero-norm feature replaced by the uniform unit vector");
    std::fill(out.begin(), out.end(), 1.0 / std::sqrt(static_cast<double>(v.size())));
    return out;
  }
  for (auto& x : out) x /= nrm;
  return out;
}

inline Matrix normalize_rows(const Matrix& m, Diagnostics* diag, const std::string& what) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto unit = normalized_or_uniform(m.row(r), diag, what + " row " + std::to_string(r));
    std::copy(unit.begin(), unit.end(), out.row(r).begin());
  }
  return out;
}

/// C_ab = 1 - <src_a/|src_a|, tgt_b/|tgt_b|>.
inline Matrix cost_matrix(const Matrix& src, const Matrix& tgt, Diagnostics* diag = nullptr) {
  if (src.cols() != tgt.cols()) throw DomainError("cost_matrix: feature dimensions differ");
  if (src.rows() == 0 || tgt.rows() == 0 || src.cols() == 0) throw DomainError("cost_matrix: empty features");
  Matrix cost = matmul_nt(normalize_rows(src, diag, "cost_matrix src"), normalize_rows(tgt, diag, "cost_matrix tgt"));
  for (auto& c : cost.data()) c = std::clamp(1.0 - c, 0.0, 2.0);
  return cost;
}

/// Cosine distance 1 - cos(a, b) under the same zero-vector policy as cost_matrix.
inline double cosine_distance(std::span<const double> a, std::span<const double> b, Diagnostics* diag = nullptr) {
  if (a.size() != b.size() || a.empty()) throw DomainError("cosine_distance: size mismatch");
  auto ua = normalized_or_uniform(a, diag, "global feature");
  auto ub = normalized_or_uniform(b, diag, "global feature");
  return std::clamp(1.0 - dot(ua, ub), 0.0, 2.0);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b, Diagnostics* diag = nullptr) {
  if (a.size() != b.size() || a.empty()) throw DomainError("cosine_similarity: size mismatch");
  return dot(normalized_or_uniform(a, diag, "feature"), normalized_or_uniform(b, diag, "feature"));
}

// ---------------------------------------------------------------------------
// Entropic optimal transport with uniform marginals (log-domain Sinkhorn).

struct SinkhornOptions {
  std::size_t max_iters = 100000;
  double tol = 1e-6;
};

struct TransportPlan {
  Matrix plan;             // n x n, rows and columns each sum to 1/n
  Matrix cost;
  double lambda = 0.1;
  std::size_t iterations = 0;
  double residual = 0.0;   // max row-marginal residual of the returned plan
  bool converged = false;
};

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

/// Entropic dual objective sum_a f_a/n + sum_b g_b/n - lambda sum_ab exp((f_a + g_b - C_ab)/lambda).
inline double sinkhorn_dual(const Matrix& cost, double lambda, std::span<const double> f, std::span<const double> g) {
  const std::size_t n = cost.rows();
  const double w = 1.0 / static_cast<double>(n);
  double val = 0.0;
  for (std::size_t a = 0; a < n; ++a) val += w * (f[a] + g[a]);
  double mass = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) mass += std::exp((f[a] + g[b] - cost(a, b)) / lambda);
  return val - lambda * mass;
}

/// Runs Sinkhorn scaling to uniform marginals 1/n. If `dual_trace` is given, the dual
/// objective after every full (f, g) update is appended to it.
inline TransportPlan sinkhorn(const Matrix& cost, double lambda, const SinkhornOptions& opts = {},
                              std::vector<double>* dual_trace = nullptr) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("sinkhorn: lambda must be > 0");
  if (cost.rows() == 0 || cost.rows() != cost.cols()) throw DomainError("sinkhorn: cost must be square, non-empty");
  if (!all_finite(cost.data())) throw DomainError("sinkhorn: non-finite cost");

  const std::size_t n = cost.rows();
  const double log_marginal = -std::log(static_cast<double>(n));
  const double target = 1.0 / static_cast<double>(n);
  std::vector<double> f(n, 0.0), g(n, 0.0), buf(n);

  auto plan_entry = [&](std::size_t a, std::size_t b) { return std::exp((f[a] + g[b] - cost(a, b)) / lambda); };
  auto row_residual = [&] {
    double worst = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) s += plan_entry(a, b);
      worst = std::max(worst, std::abs(s - target));
    }
    return worst;
  };

  TransportPlan out;
  out.cost = cost;
  out.lambda = lambda;
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) buf[b] = (g[b] - cost(a, b)) / lambda;
      f[a] = lambda * (log_marginal - detail::log_sum_exp(buf));
    }
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t a = 0; a < n; ++a) buf[a] = (f[a] - cost(a, b)) / lambda;
      g[b] = lambda * (log_marginal - detail::log_sum_exp(buf));
    }
    out.iterations = it + 1;
    if (dual_trace != nullptr) dual_trace->push_back(sinkhorn_dual(cost, lambda, f, g));
    // columns are exact after the g update; rows carry the residual
    if (row_residual() < opts.tol) {
      out.converged = true;
      break;
    }
  }

  Matrix plan(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) plan(a, b) = plan_entry(a, b);
  // final row-then-column rescaling
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) s += plan(a, b);
    for (std::size_t b = 0; b < n; ++b) plan(a, b) *= target / s;
  }
  for (std::size_t b = 0; b < n; ++b) {
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) s += plan(a, b);
    for (std::size_t a = 0; a < n; ++a) plan(a, b) *= target / s;
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) s += plan(a, b);
    worst = std::max(worst, std::abs(s - target));
  }
  out.residual = worst;
  out.plan = std::move(plan);
  return out;
}

/// <C, pi>
inline double transport_objective(const Matrix& cost, const Matrix& plan) { return dot(cost.data(), plan.data()); }

struct OtResult {
  double loss = 0.0;
  TransportPlan plan;
};

inline OtResult ot_loss(const HighFreqSelection& src, const HighFreqSelection& tgt, double lambda,
                        const SinkhornOptions& opts = {}, Diagnostics* diag = nullptr) {
  if (src.features.rows() != tgt.features.rows() || src.features.cols() != tgt.features.cols())
    throw DomainError("ot_loss: selections differ in shape");
  OtResult r;
  r.plan = sinkhorn(cost_matrix(src.features, tgt.features, diag), lambda, opts);
  r.loss = std::clamp(transport_objective(r.plan.cost, r.plan.plan), 0.0, 2.0);
  return r;
}

inline double per_encoder_loss(std::span<const double> global_src, std::span<const double> global_tgt,
                               const HighFreqSelection& src_sel, const HighFreqSelection& tgt_sel, double w_g,
                               double w_l, double lambda, const SinkhornOptions& opts = {},
                               Diagnostics* diag = nullptr) {
  if (!(w_g >= 0.0) || !(w_l >= 0.0)) throw DomainError("per_encoder_loss: weights must be >= 0");
  const double global = cosine_distance(global_src, global_tgt, diag);
  if (w_l == 0.0) return w_g * global;
  return w_g * global + w_l * ot_loss(src_sel, tgt_sel, lambda, opts, diag).loss;
}

// ---------------------------------------------------------------------------
// Composite per-encoder loss with reverse-mode adjoints.
//
// The transport plan is treated as a constant in the backward pass, so
// dL_freq/dC = pi*. Gradients are therefore exact for the frozen-plan
// surrogate L~(x) = w_g (1 - cos(g(x), g_t)) + w_l <C(x), pi_bar>.

struct AlignmentParams {
  std::size_t theta = 10;
  std::size_t n = 10;
  double w_g = 1.0;
  double w_l = 0.2;
  double lambda = 0.1;
  SinkhornOptions sinkhorn{};
};

/// Target-side quantities; constant over an attack run.
struct TargetFeatures {
  std::vector<double> global;
  HighFreqSelection selection;
};

inline TargetFeatures target_features(std::span<const double> global, const Matrix& patches,
                                      const AlignmentParams& params) {
  TargetFeatures t;
  t.global.assign(global.begin(), global.end());
  if (params.w_l > 0.0) t.selection = select_high_freq(dct_tokens(patches), params.theta, params.n);
  return t;
}

struct LossTerms {
  double global = 0.0;  // 1 - cos
  double freq = 0.0;    // <C, pi*>
  double total = 0.0;   // w_g global + w_l freq
  HighFreqSelection selection;
  TransportPlan plan;
};

struct LossAdjoints {
  std::vector<double> d_global;  // dL/d global_feature
  Matrix d_patches;              // dL/d patches
};

inline LossTerms evaluate_alignment(std::span<const double> global_src, const Matrix& patches_src,
                                    const TargetFeatures& target, const AlignmentParams& params,
                                    Diagnostics* diag = nullptr) {
  if (!(params.w_g >= 0.0) || !(params.w_l >= 0.0)) throw DomainError("loss weights must be >= 0");
  LossTerms t;
  t.global = cosine_distance(global_src, target.global, diag);
  if (params.w_l > 0.0) {
    t.selection = select_high_freq(dct_tokens(patches_src), params.theta, params.n);
    auto ot = ot_loss(t.selection, target.selection, params.lambda, params.sinkhorn, diag);
    t.freq = ot.loss;
    t.plan = std::move(ot.plan);
  }
  t.total = params.w_g * t.global + params.w_l * t.freq;
  return t;
}

namespace detail {

// d/dx of <x/|x|, y> = (y - <x^,y> x^) / |x|; zero if x was degenerate.
inline void add_unit_dot_grad(std::span<const double> x, std::span<const double> y_unit, double scale,
                              std::span<double> out) {
  const double nrm = norm2(x);
  if (nrm == 0.0) return;
  double proj = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) proj += x[i] / nrm * y_unit[i];
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += scale * (y_unit[i] - proj * x[i] / nrm) / nrm;
}

}  // namespace detail

/// Adjoints of `terms.total` with respect to the encoder outputs, plan held fixed.
inline LossAdjoints alignment_adjoints(std::span<const double> global_src, const Matrix& patches_src,
                                       const TargetFeatures& target, const LossTerms& terms,
                                       const AlignmentParams& params) {
  LossAdjoints adj;
  adj.d_global.assign(global_src.size(), 0.0);
  auto g_t = normalized_or_uniform(target.global, nullptr, "");
  detail::add_unit_dot_grad(global_src, g_t, -params.w_g, adj.d_global);

  adj.d_patches = Matrix(patches_src.rows(), patches_src.cols());
  if (params.w_l == 0.0) return adj;

  const auto& sel = terms.selection;
  const Matrix tgt_unit = normalize_rows(target.selection.features, nullptr, "");
  const std::size_t n = sel.indices.size(), d = patches_src.cols();
  Matrix d_coeffs(patches_src.rows(), d);
  std::vector<double> pulled(d);
  for (std::size_t a = 0; a < n; ++a) {
    std::fill(pulled.begin(), pulled.end(), 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      const double w = terms.plan.plan(a, b);
      for (std::size_t i = 0; i < d; ++i) pulled[i] += w * tgt_unit(b, i);
    }
    detail::add_unit_dot_grad(sel.features.row(a), pulled, -params.w_l, d_coeffs.row(sel.indices[a]));
  }
  adj.d_patches = idct_tokens(d_coeffs);
  return adj;
}

/// Frozen-plan surrogate value: selection indices and plan taken from `frozen`.
inline double frozen_plan_loss(std::span<const double> global_src, const Matrix& patches_src,
                               const TargetFeatures& target, const LossTerms& frozen, const AlignmentParams& params) {
  double value = params.w_g * cosine_distance(global_src, target.global);
  if (params.w_l == 0.0) return value;
  const SpectralStack stack = dct_tokens(patches_src);
  Matrix features(frozen.selection.indices.size(), stack.coeffs.cols());
  for (std::size_t a = 0; a < frozen.selection.indices.size(); ++a) {
    auto src = stack.coeffs.row(frozen.selection.indices[a]);
    std::copy(src.begin(), src.end(), features.row(a).begin());
  }
  const Matrix cost = cost_matrix(features, target.selection.features);
  return value + params.w_l * transport_objective(cost, frozen.plan.plan);
}

}  // namespace fra

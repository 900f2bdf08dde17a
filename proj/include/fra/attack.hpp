#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fra/alignment.hpp"
#include "fra/encoders.hpp"
#include "fra/spectral.hpp"
#include "fra/tensor.hpp"

namespace fra {

enum class Optimizer { fgsm, mi_fgsm, pgd_adam };

inline std::string_view to_string(Optimizer o) {
  switch (o) {
    case Optimizer::fgsm: return "fgsm";
    case Optimizer::mi_fgsm: return "mi-fgsm";
    case Optimizer::pgd_adam: return "pgd-adam";
  }
  return "?";
}

inline Optimizer parse_optimizer(std::string_view name) {
  for (auto o : {Optimizer::fgsm, Optimizer::mi_fgsm, Optimizer::pgd_adam})
    if (to_string(o) == name) return o;
  throw DomainError("unknown optimizer '" + std::string(name) + "'");
}

struct AttackConfig {
  double epsilon = 16.0 / 255.0;  // L-inf budget
  double alpha = 1.0 / 255.0;     // step size
  std::size_t iters = 300;
  AlignmentParams align{};        // theta, n, w_g, w_l, lambda, Sinkhorn limits
  RadialFilter fgr = RadialFilter::polynomial(1.5);
  double mu = 1.0;                // momentum decay
  double temperature = 1.0;       // dynamic weighting
  Optimizer optimizer = Optimizer::mi_fgsm;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Structural checks shared by every entry point. `alpha == 0` and `iters == 0`
  /// are accepted here (they are meaningful no-op runs); the config parser is stricter.
  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in (0, 1]");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be >= 0");
    if (!(align.lambda > 0.0)) throw DomainError("lambda must be > 0");
    if (!(align.w_g >= 0.0) || !(align.w_l >= 0.0)) throw DomainError("loss weights must be >= 0");
    if (align.theta < 1) throw DomainError("theta must be >= 1");
    if (align.n < 1) throw DomainError("n must be >= 1");
    if (!(temperature > 0.0)) throw DomainError("temperature must be > 0");
    if (!(mu >= 0.0)) throw DomainError("mu must be >= 0");
    fgr.validate();
  }
};

struct TraceRecord {
  std::size_t iteration = 0;        // 1-based
  std::vector<double> losses;       // L_j
  std::vector<double> global_terms; // 1 - cos(g_j(x), g_j(target))
  std::vector<double> freq_terms;   // OT loss
  std::vector<double> weights;      // W_j
  double total_loss = 0.0;          // sum_j W_j L_j
  double grad_l1 = 0.0;             // |grad|_1 before FGR
  double filtered_grad_l1 = 0.0;    // |grad~|_1 after FGR
  double delta_linf = 0.0;          // after the update
  std::vector<std::string> warnings;
};

struct AttackState {
  Image delta;
  Image momentum;       // MI-FGSM accumulator / Adam first moment
  Image second_moment;  // Adam only
  std::size_t adam_step = 0;
  std::optional<std::vector<double>> prev_losses;
  std::vector<TraceRecord> trace;

  static AttackState zeros_like(const Image& image) {
    AttackState s;
    s.delta = Image(image.height(), image.width(), image.channels());
    s.momentum = s.delta;
    s.second_moment = s.delta;
    return s;
  }
};

/// W_j = J softmax(S / T)_j with S_j = current_j / previous_j; all ones when previous is unset.
inline std::vector<double> dynamic_weights(std::span<const double> current,
                                           const std::optional<std::vector<double>>& previous, double temperature,
                                           Diagnostics* diag = nullptr) {
  const std::size_t j = current.size();
  if (j == 0) throw DomainError("dynamic_weights: empty loss vector");
  if (!(temperature > 0.0)) throw DomainError("dynamic_weights: temperature must be > 0");
  for (double l : current)
    if (!std::isfinite(l) || l < 0.0) throw DomainError("dynamic_weights: losses must be finite and >= 0");
  if (!previous) return std::vector<double>(j, 1.0);
  if (previous->size() != j) throw DomainError("dynamic_weights: previous losses have wrong length");

  std::vector<double> s(j);
  for (std::size_t i = 0; i < j; ++i) {
    if ((*previous)[i] == 0.0) {
      warn(diag, "dynamic_weights: previous loss of encoder " + std::to_string(i) + " is zero; ratio set to 1");
      s[i] = 1.0;
    } else {
      s[i] = current[i] / (*previous)[i];
    }
    s[i] /= temperature;
  }
  const double mx = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (auto& x : s) sum += (x = std::exp(x - mx));
  for (auto& x : s) x = static_cast<double>(j) * x / sum;
  return s;
}

/// Encoders plus their cached target-side features for one (target, config).
struct Surrogates {
  std::vector<Encoder> encoders;
  std::vector<TargetFeatures> targets;
};

inline Surrogates prepare_surrogates(std::span<const EncoderSpec> ensemble, const Image& target,
                                     const AttackConfig& config) {
  if (ensemble.empty()) throw DomainError("attack: surrogate ensemble is empty");
  Surrogates s;
  for (const auto& spec : ensemble) {
    s.encoders.emplace_back(spec);
    const auto out = s.encoders.back().forward(target);
    s.targets.push_back(target_features(out.global_feature, out.patches, config.align));
  }
  return s;
}

inline Image add(const Image& a, const Image& b) {
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

inline Image clamp01(Image img) {
  for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

inline double l1_norm(const Image& img) {
  double s = 0.0;
  for (double v : img.data()) s += std::abs(v);
  return s;
}

inline double linf_norm(const Image& img) {
  double s = 0.0;
  for (double v : img.data()) s = std::max(s, std::abs(v));
  return s;
}

namespace detail {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Per-encoder loss terms at `image`.
inline std::vector<LossTerms> evaluate_losses(const Image& image, const Surrogates& s, const AttackConfig& config,
                                              Diagnostics* diag = nullptr) {
  std::vector<LossTerms> terms;
  for (std::size_t j = 0; j < s.encoders.size(); ++j) {
    const auto out = s.encoders[j].forward(image);
    terms.push_back(evaluate_alignment(out.global_feature, out.patches, s.targets[j], config.align, diag));
  }
  return terms;
}

struct CompositeGradient {
  std::vector<LossTerms> terms;
  std::vector<double> weights;
  Image gradient;  // d(sum_j W_j L_j)/d image with W and the transport plans held fixed
};

/// Loss terms at `image`, ensemble weights from `weights_for(losses)`, and the weighted input gradient.
template <class WeightFn>
CompositeGradient composite_gradient_with(const Image& image, const Surrogates& s, const AttackConfig& config,
                                          WeightFn&& weights_for, Diagnostics* diag = nullptr) {
  CompositeGradient cg;
  std::vector<EncoderOutput> outs;
  std::vector<double> losses;
  for (std::size_t j = 0; j < s.encoders.size(); ++j) {
    outs.push_back(s.encoders[j].forward(image));
    cg.terms.push_back(
        evaluate_alignment(outs[j].global_feature, outs[j].patches, s.targets[j], config.align, diag));
    losses.push_back(cg.terms[j].total);
  }
  cg.weights = weights_for(std::span<const double>(losses));
  cg.gradient = Image(image.height(), image.width(), image.channels());
  for (std::size_t j = 0; j < s.encoders.size(); ++j) {
    auto adj = alignment_adjoints(outs[j].global_feature, outs[j].patches, s.targets[j], cg.terms[j], config.align);
    for (auto& v : adj.d_global) v *= cg.weights[j];
    for (auto& v : adj.d_patches.data()) v *= cg.weights[j];
    const Image g = s.encoders[j].input_gradient(outs[j], adj.d_global, adj.d_patches);
    for (std::size_t i = 0; i < g.size(); ++i) cg.gradient.data()[i] += g.data()[i];
  }
  return cg;
}

inline CompositeGradient composite_gradient(const Image& image, const Surrogates& s, const AttackConfig& config,
                                            std::span<const double> weights, Diagnostics* diag = nullptr) {
  if (weights.size() != s.encoders.size()) throw DomainError("composite_gradient: one weight per encoder required");
  return composite_gradient_with(
      image, s, config, [&](std::span<const double>) { return std::vector<double>(weights.begin(), weights.end()); },
      diag);
}

/// One attack iteration with an arbitrary gradient transform in place of FGR.
template <class GradientTransform>
void step_with(AttackState& state, const AttackConfig& config, const Image& source, const Surrogates& s,
               GradientTransform&& transform) {
  if (!state.delta.same_shape(source)) throw DomainError("step: state does not match source shape");
  Diagnostics diag;
  TraceRecord rec;
  rec.iteration = state.trace.size() + 1;

  auto cg = composite_gradient_with(
      add(source, state.delta), s, config,
      [&](std::span<const double> losses) {
        return dynamic_weights(losses, state.prev_losses, config.temperature, &diag);
      },
      &diag);
  for (const auto& t : cg.terms) {
    rec.losses.push_back(t.total);
    rec.global_terms.push_back(t.global);
    rec.freq_terms.push_back(t.freq);
  }
  rec.weights = cg.weights;
  for (std::size_t j = 0; j < rec.losses.size(); ++j) rec.total_loss += rec.weights[j] * rec.losses[j];
  const Image& grad = cg.gradient;

  rec.grad_l1 = l1_norm(grad);
  const Image filtered = transform(grad);
  rec.filtered_grad_l1 = l1_norm(filtered);

  auto& delta = state.delta.data();
  const auto& gt = filtered.data();
  const double eps = config.epsilon;
  if (rec.filtered_grad_l1 == 0.0) {
    diag.warn("step: regularized gradient vanished; momentum and delta left unchanged");
  } else {
    switch (config.optimizer) {
      case Optimizer::mi_fgsm: {
        auto& m = state.momentum.data();
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = config.mu * m[i] + gt[i] / rec.filtered_grad_l1;
        for (std::size_t i = 0; i < delta.size(); ++i)
          delta[i] = std::clamp(delta[i] - config.alpha * detail::sign(m[i]), -eps, eps);
        break;
      }
      case Optimizer::fgsm:
        for (std::size_t i = 0; i < delta.size(); ++i)
          delta[i] = std::clamp(delta[i] - config.alpha * detail::sign(gt[i]), -eps, eps);
        break;
      case Optimizer::pgd_adam: {
        auto& m = state.momentum.data();
        auto& v = state.second_moment.data();
        ++state.adam_step;
        const double t = static_cast<double>(state.adam_step);
        const double c1 = 1.0 - std::pow(config.adam_beta1, t);
        const double c2 = 1.0 - std::pow(config.adam_beta2, t);
        for (std::size_t i = 0; i < delta.size(); ++i) {
          m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * gt[i];
          v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * gt[i] * gt[i];
          const double dir = (m[i] / c1) / (std::sqrt(v[i] / c2) + config.adam_eps);
          delta[i] = std::clamp(delta[i] - config.alpha * dir, -eps, eps);
        }
        break;
      }
    }
  }
  state.prev_losses = rec.losses;
  rec.delta_linf = linf_norm(state.delta);
  rec.warnings = std::move(diag.warnings);
  state.trace.push_back(std::move(rec));
}

/// One attack iteration: losses, dynamic weighting, gradient, FGR, optimizer update.
inline void step(AttackState& state, const AttackConfig& config, const Image& source, const Surrogates& s) {
  step_with(state, config, source, s, [&](const Image& g) { return apply_fgr(g, config.fgr); });
}

inline AttackState step(AttackState state, const AttackConfig& config, const Image& source, const Image& target,
                        std::span<const EncoderSpec> ensemble) {
  config.validate();
  step(state, config, source, prepare_surrogates(ensemble, target, config));
  return state;
}

struct AttackResult {
  Image adversarial;
  std::vector<TraceRecord> trace;
  Image delta;
};

inline void check_attack_inputs(const Image& source, const Image& target) {
  if (!source.same_shape(target)) throw DomainError("attack: source and target shapes differ");
  for (const Image* img : {&source, &target})
    for (double v : img->data())
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("attack: image entries must lie in [0, 1]");
}

template <class GradientTransform>
AttackResult run_attack_with(const Image& source, const Image& target, const AttackConfig& config,
                             std::span<const EncoderSpec> ensemble, GradientTransform&& transform) {
  config.validate();
  check_attack_inputs(source, target);
  const Surrogates s = prepare_surrogates(ensemble, target, config);
  AttackState state = AttackState::zeros_like(source);
  for (std::size_t t = 0; t < config.iters; ++t) step_with(state, config, source, s, transform);
  AttackResult r;
  r.adversarial = clamp01(add(source, state.delta));
  r.trace = std::move(state.trace);
  r.delta = std::move(state.delta);
  return r;
}

/// Runs `config.iters` steps from delta = 0 and returns clamp(source + delta, 0, 1).
inline AttackResult run_attack(const Image& source, const Image& target, const AttackConfig& config,
                               std::span<const EncoderSpec> ensemble) {
  return run_attack_with(source, target, config, ensemble,
                         [&](const Image& g) { return apply_fgr(g, config.fgr); });
}

}  // namespace fra

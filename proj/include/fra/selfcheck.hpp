#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "fra/attack.hpp"
#include "fra/benchmark.hpp"
#include "fra/defenses.hpp"
#include "fra/gradcheck.hpp"
#include "fra/rng.hpp"
#include "fra/spectral.hpp"

namespace fra {

struct SelfCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selfcheck_detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline Matrix random_plane(std::uint64_t seed, std::size_t h, std::size_t w, double lo, double hi) {
  Xorshift64Star rng(seed);
  Matrix m(h, w);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace selfcheck_detail

/// A handful of fast invariant checks on small inputs. Takes a second or two.
inline std::vector<SelfCheck> run_selfchecks() {
  using selfcheck_detail::fmt;
  std::vector<SelfCheck> out;

  {
    const Matrix x = selfcheck_detail::random_plane(1, 12, 9, -1.0, 1.0);
    const double err = max_abs_diff(idct2(dct2(x)).data(), x.data());
    out.push_back({"dct2 round trip", err < 1e-12, fmt("max error %.3g", err)});
  }
  {
    const Image g = to_image(Tensor({8, 8, 3}, selfcheck_detail::random_plane(2, 1, 192, -1.0, 1.0).data()));
    const Image f = apply_fgr(g, RadialFilter::identity());
    out.push_back({"identity filter is exact", f.data() == g.data(), ""});
  }
  {
    const Matrix cost = selfcheck_detail::random_plane(3, 6, 6, 0.0, 2.0);
    const auto tp = sinkhorn(cost, 0.1);
    double worst = 0.0;
    for (std::size_t b = 0; b < 6; ++b) {
      double s = 0.0;
      for (std::size_t a = 0; a < 6; ++a) s += tp.plan(a, b);
      worst = std::max(worst, std::abs(s - 1.0 / 6.0));
    }
    worst = std::max(worst, tp.residual);
    out.push_back({"sinkhorn marginals", tp.converged && worst < 1e-6, fmt("max residual %.3g", worst)});
  }

  const std::vector<EncoderSpec> ensemble = {
      {.kind = EncoderKind::attention_1layer, .patch_size = 4, .embed_dim = 8, .seed = 5, .height = 16, .width = 16},
      {.kind = EncoderKind::linear_patch, .patch_size = 2, .embed_dim = 8, .seed = 6, .height = 16, .width = 16}};
  const auto [src, tgt] = synthetic_pair(7, 0, 16, 16, 3);
  AttackConfig cfg;
  cfg.align.theta = 3;
  cfg.align.n = 4;
  cfg.iters = 5;
  {
    const Surrogates s = prepare_surrogates(ensemble, tgt, cfg);
    const std::vector<double> w = {0.7, 1.3};
    const auto r = check_composite_gradient(src, s, cfg, w, 40, 8);
    out.push_back({"composite gradient vs finite differences", r.passed, fmt("max relative error %.3g", r.max_rel_error)});
  }
  {
    const auto r = run_attack(src, tgt, cfg, ensemble);
    double worst = 0.0;
    for (const auto& rec : r.trace) worst = std::max(worst, rec.delta_linf);
    bool in_range = true;
    for (double v : r.adversarial.data()) in_range &= v >= 0.0 && v <= 1.0;
    out.push_back({"attack respects budget and range", worst <= cfg.epsilon && in_range,
                   fmt("max |delta|_inf %.6g", worst)});
  }
  {
    const Image flat(16, 16, 3, 0.25);
    const Image blurred = defend(flat, DefenseSpec::gaussian());
    const double err = max_abs_diff(blurred.data(), flat.data());
    out.push_back({"gaussian preserves constant image", err < 1e-12, fmt("max error %.3g", err)});
  }
  return out;
}

}  // namespace fra

#include <gtest/gtest.h>

#include <string>

#include "fra/config.hpp"

using namespace fra;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.attack.epsilon, 16.0 / 255.0);
  EXPECT_EQ(c.attack.alpha, 1.0 / 255.0);
  EXPECT_EQ(c.attack.iters, 300u);
  EXPECT_EQ(c.attack.align.theta, 10u);
  EXPECT_EQ(c.attack.align.n, 10u);
  EXPECT_EQ(c.attack.align.w_g, 1.0);
  EXPECT_EQ(c.attack.align.w_l, 0.2);
  EXPECT_EQ(c.attack.align.lambda, 0.1);
  EXPECT_EQ(c.attack.fgr.kind, FilterKind::polynomial);
  EXPECT_EQ(c.attack.fgr.p, 1.5);
  EXPECT_EQ(c.attack.mu, 1.0);
  EXPECT_EQ(c.attack.temperature, 1.0);
  EXPECT_EQ(c.attack.optimizer, Optimizer::mi_fgsm);
  EXPECT_EQ(c.ensemble, default_ensemble());
  ASSERT_EQ(c.holdouts.size(), 1u);
  EXPECT_EQ(c.holdouts[0], default_holdout());
  EXPECT_EQ(c.defenses.size(), 3u);
  EXPECT_FALSE(c.sweep.has_value());
}

TEST(Config, BandClipWithoutThresholdsUsesDefaults) {
  const RunConfig c = parse_config("[fgr]\nkind = band-clip\n");
  EXPECT_EQ(c.attack.fgr.kind, FilterKind::band_clip);
  EXPECT_EQ(c.attack.fgr.tau_low, 1.0 / 3.0);
  EXPECT_EQ(c.attack.fgr.tau_high, 2.0 / 3.0);
}

TEST(Config, ZeroEpsilonRejectedWithKeyAndLine) {
  const std::string err = error_of("# budget\n[attack]\nepsilon = 0\n");
  EXPECT_NE(err.find("epsilon"), std::string::npos) << err;
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST(Config, UnknownKeyAndSectionRejected) {
  std::string err = error_of("[attack]\niters = 5\nepsilom = 0.1\n");
  EXPECT_NE(err.find("epsilom"), std::string::npos) << err;
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
  err = error_of("[attak]\n");
  EXPECT_NE(err.find("attak"), std::string::npos) << err;
}

TEST(Config, TypeMismatchNamesKey) {
  const std::string err = error_of("[attack]\niters = many\n");
  EXPECT_NE(err.find("attack.iters"), std::string::npos) << err;
  EXPECT_NE(err.find("line 2"), std::string::npos) << err;
  EXPECT_FALSE(error_of("[attack]\nn = -3\n").empty());
  EXPECT_FALSE(error_of("[run]\nsave_images = maybe\n").empty());
  EXPECT_FALSE(error_of("[attack]\nalpha = nan\n").empty());
}

TEST(Config, FractionsAndComments) {
  const RunConfig c = parse_config("[attack]\nepsilon = 8/255   # budget\nalpha = 0.5/255\n");
  EXPECT_EQ(c.attack.epsilon, 8.0 / 255.0);
  EXPECT_EQ(c.attack.alpha, 0.5 / 255.0);
  EXPECT_FALSE(error_of("[attack]\nepsilon = 1/0\n").empty());
}

TEST(Config, RepeatedSectionsReplaceDefaults) {
  const RunConfig c = parse_config(
      "[encoder]\nkind = linear-patch\nseed = 3\n"
      "[encoder]\nseed = 4\npatch_size = 2\nembed_dim = 8\n"
      "[pair]\nsource = a.ppm\ntarget = b.ppm\n"
      "[defense]\nkind = gaussian\nsigma = 1.5\nkernel = 7\n");
  ASSERT_EQ(c.ensemble.size(), 2u);
  EXPECT_EQ(c.ensemble[0].kind, EncoderKind::linear_patch);
  EXPECT_EQ(c.ensemble[1].patch_size, 2u);
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(c.pairs[0].target, "b.ppm");
  ASSERT_EQ(c.defenses.size(), 1u);
  EXPECT_EQ(c.defenses[0].kernel, 7u);
  EXPECT_EQ(c.holdouts[0], default_holdout());
}

TEST(Config, CrossFieldInvariants) {
  EXPECT_NE(error_of("[holdout]\nseed = 11\n").find("collides"), std::string::npos);
  EXPECT_NE(error_of("[fgr]\nkind = band-clip\ntau_low = 0.8\n").find("tau_low"), std::string::npos);
  // patch 8 on 32x32 gives P = 16 < theta + n
  EXPECT_NE(error_of("[encoder]\npatch_size = 8\n").find("theta + n"), std::string::npos);
  EXPECT_EQ(error_of("[encoder]\npatch_size = 8\n[attack]\nw_l = 0\n"), "");
  EXPECT_FALSE(error_of("[pair]\nsource = a.ppm\n").empty());
  EXPECT_FALSE(error_of("[defense]\nkind = center-crop\nratio = 0\n").empty());
  EXPECT_FALSE(error_of("[encoder]\nheight = 30\n").empty());
}

TEST(Config, ZeroIterationsAllowedZeroAlphaNot) {
  EXPECT_EQ(parse_config("[attack]\niters = 0\n").attack.iters, 0u);
  EXPECT_FALSE(error_of("[attack]\nalpha = 0\n").empty());
}

TEST(Config, CanonicalTextRoundTrips) {
  const RunConfig c = parse_config(
      "[attack]\nepsilon = 8/255\niters = 7\noptimizer = pgd-adam\n"
      "[fgr]\nkind = sigmoid\nbeta = 3\ncenter = 0.4\n"
      "[pair]\nsource = x.ppm\ntarget = y.ppm\n"
      "[run]\nparallelism = 4\nmaster_seed = 99\n"
      "[sweep]\nkey = fgr.p\nvalues = 0.5, 1.0\n");
  const std::string text = to_config_text(c);
  const RunConfig again = parse_config(text);
  EXPECT_EQ(to_config_text(again), text);
  EXPECT_EQ(again.attack.epsilon, c.attack.epsilon);
  EXPECT_EQ(again.attack.fgr.center, 0.4);
  EXPECT_EQ(again.sweep->values, (std::vector<std::string>{"0.5", "1.0"}));
}

TEST(Config, SweepValidationAndApplication) {
  const RunConfig c = parse_config("[sweep]\nkey = attack.epsilon\nvalues = 4/255, 8/255\n");
  EXPECT_EQ(with_sweep_value(c, "4/255").attack.epsilon, 4.0 / 255.0);
  EXPECT_FALSE(error_of("[sweep]\nkey = attack.epsilon\nvalues = 4/255, 0\n").empty());
  EXPECT_FALSE(error_of("[sweep]\nkey = run.parallelism\nvalues = 1\n").empty());
  EXPECT_FALSE(error_of("[sweep]\nkey = fgr.q\nvalues = 1\n").empty());
  EXPECT_FALSE(error_of("[sweep]\nkey = epsilon\nvalues = 1\n").empty());
}

TEST(Config, SweepPointsDifferOnlyInSweptKey) {
  const RunConfig c = parse_config("[sweep]\nkey = fgr.p\nvalues = 0.5, 1.0, 1.5, 2.0, 2.5, 3.0\n");
  const auto base = flat_settings(with_sweep_value(c, c.sweep->values[0]));
  for (const auto& v : c.sweep->values) {
    const auto point = flat_settings(with_sweep_value(c, v));
    for (const auto& [k, val] : point)
      if (k != "fgr.p") {
        EXPECT_EQ(val, base.at(k)) << k;
      }
  }
}

TEST(Config, FlagBindingsAreKebabCase) {
  bool saw_wg = false, saw_fgr_p = false, saw_out = false;
  for (const auto& b : flag_bindings()) {
    EXPECT_EQ(b.flag.find('_'), std::string::npos) << b.flag;
    saw_wg |= b.flag == "w-g" && b.section == "attack" && b.key == "w_g";
    saw_fgr_p |= b.flag == "fgr-p" && b.key == "p";
    saw_out |= b.flag == "output-dir" && b.section == "run";
  }
  EXPECT_TRUE(saw_wg && saw_fgr_p && saw_out);
}

TEST(Config, AppendEntryParsesInlineSpec) {
  RunConfig c;
  c.ensemble.clear();
  append_entry(c, "encoder", "kind=linear-patch, seed=5, embed_dim=8", "--encoder: ");
  ASSERT_EQ(c.ensemble.size(), 1u);
  EXPECT_EQ(c.ensemble[0].seed, 5u);
  EXPECT_EQ(c.ensemble[0].embed_dim, 8u);
  EXPECT_THROW(append_entry(c, "encoder", "seed", ""), ConfigError);
  EXPECT_THROW(append_entry(c, "attack", "n=1", ""), ConfigError);
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fra/batch.hpp"

using namespace fra;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

RunConfig small_run(const std::string& name) {
  RunConfig c = parse_config(
      "[encoder]\nkind = attention-1layer\npatch_size = 4\nembed_dim = 8\nseed = 11\nheight = 16\nwidth = 16\n"
      "[holdout]\nkind = linear-patch\npatch_size = 4\nembed_dim = 8\nseed = 900\nheight = 16\nwidth = 16\n"
      "[attack]\niters = 3\ntheta = 2\nn = 4\n");
  c.synthetic_pairs = 3;
  c.output_dir = (fs::temp_directory_path() / "fra_batch_test" / name).string();
  fs::remove_all(c.output_dir);
  return c;
}

}  // namespace

TEST(Batch, ZeroIterationsLeavesSourceAfterEightBitRoundTrip) {
  RunConfig c = small_run("zero");
  c.attack.iters = 0;
  c.synthetic_pairs = 1;
  const auto s = run_batch(c, false);
  EXPECT_EQ(s.failed, 0u);
  const Image adv = load_image(fs::path(c.output_dir) / "adversarial" / "pair_0000.ppm");
  const auto [src, tgt] = synthetic_pair(c.master_seed, 0, 16, 16, 3);
  EXPECT_EQ(adv.data(), decode_ppm(encode_ppm(src)).data());
}

TEST(Batch, MetricsRowsPerPairHoldoutDefense) {
  RunConfig c = small_run("rows");
  const auto s = run_batch(c, true);
  EXPECT_EQ(s.exit_code(), 0);
  EXPECT_EQ(s.budget_violations, 0u);
  const std::string csv = slurp(fs::path(c.output_dir) / "metrics.csv");
  EXPECT_EQ(csv.rfind(kMetricsHeader, 0), 0u);
  EXPECT_EQ(count_lines(csv), 2 + 3 * 1 * (1 + c.defenses.size()));
  const std::string trace = slurp(fs::path(c.output_dir) / "traces" / "pair_0002.jsonl");
  EXPECT_EQ(count_lines(trace), 3u);
  const auto first = nlohmann::json::parse(trace.substr(0, trace.find('\n')));
  EXPECT_EQ(first.at("iteration"), 1);
  EXPECT_EQ(first.at("weights").size(), 1u);
  EXPECT_EQ(parse_config(slurp(fs::path(c.output_dir) / "effective_config.txt")).synthetic_pairs, 3u);
}

TEST(Batch, MissingInputFailsOnlyThatPair) {
  RunConfig c = small_run("missing");
  c.synthetic_pairs = 0;
  const auto [src, tgt] = synthetic_pair(1, 0, 16, 16, 3);
  fs::create_directories(c.output_dir);
  const auto a = fs::path(c.output_dir) / "a.ppm", b = fs::path(c.output_dir) / "b.ppm";
  save_image(a, src);
  save_image(b, tgt);
  c.pairs = {{a.string(), b.string()}, {a.string(), (fs::path(c.output_dir) / "nope.ppm").string()}};
  auto s = run_batch(c, false);
  EXPECT_EQ(s.failed, 1u);
  EXPECT_EQ(s.exit_code(), 0);
  EXPECT_NE(slurp(fs::path(c.output_dir) / "metrics.csv").find("failed"), std::string::npos);

  c.pairs.erase(c.pairs.begin());
  s = run_batch(c, false);
  EXPECT_EQ(s.exit_code(), 1);
}

TEST(Batch, WrongImageSizeIsReported) {
  RunConfig c = small_run("size");
  fs::create_directories(c.output_dir);
  const auto a = fs::path(c.output_dir) / "big.ppm";
  save_image(a, synthetic_image(3));  // 32x32
  c.pairs = {{a.string(), a.string()}};
  const auto jobs = prepare_pairs(c);
  ASSERT_EQ(jobs.size(), 1u);
  EXPECT_NE(jobs[0].load_error.find("16x16x3"), std::string::npos) << jobs[0].load_error;
}

TEST(Sweep, RowCountsAndDeterminismAcrossParallelism) {
  RunConfig c = small_run("sweep1");
  c.sweep = SweepSpec{"fgr.p", {"0.5", "1.5", "2.5"}};
  c.holdouts.push_back(c.holdouts[0]);
  c.holdouts[1].seed = 901;
  const auto s1 = run_sweep(c);
  EXPECT_EQ(s1.pairs, 9u);
  const std::string sweep1 = slurp(fs::path(c.output_dir) / "sweep.csv");
  const std::string metrics1 = slurp(fs::path(c.output_dir) / "metrics.csv");
  EXPECT_EQ(count_lines(sweep1), 2 + 3 * 2u);
  EXPECT_EQ(count_lines(slurp(fs::path(c.output_dir) / "effective_configs.jsonl")), 3u);

  RunConfig c4 = c;
  c4.parallelism = 4;
  c4.output_dir = (fs::temp_directory_path() / "fra_batch_test" / "sweep4").string();
  run_sweep(c4);
  EXPECT_EQ(slurp(fs::path(c4.output_dir) / "sweep.csv"), sweep1);
  EXPECT_EQ(slurp(fs::path(c4.output_dir) / "metrics.csv"), metrics1);
}

TEST(Sweep, EffectiveConfigsDifferOnlyInSweptKey) {
  RunConfig c = small_run("sweepcfg");
  c.synthetic_pairs = 1;
  c.attack.iters = 1;
  c.sweep = SweepSpec{"attack.epsilon", {"4/255", "8/255"}};
  run_sweep(c);
  std::ifstream in(fs::path(c.output_dir) / "effective_configs.jsonl");
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  const auto a = nlohmann::json::parse(l1).at("settings"), b = nlohmann::json::parse(l2).at("settings");
  for (auto it = a.begin(); it != a.end(); ++it)
    if (it.key() != "attack.epsilon") {
      EXPECT_EQ(it.value(), b.at(it.key())) << it.key();
    }
  EXPECT_NE(a.at("attack.epsilon"), b.at("attack.epsilon"));
}

TEST(Parallel, PreservesTaskOrder) {
  const auto r = run_parallel<std::size_t>(50, 7, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i], i * i);
}

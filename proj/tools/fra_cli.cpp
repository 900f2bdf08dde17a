#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fra/fra.hpp"

namespace {

using namespace fra;

// Options shared by every subcommand that resolves a RunConfig.
struct ConfigOptions {
  std::string config_path;
  bool print_effective = false;
  std::map<std::string, std::string> values;  // flag -> raw value
  std::vector<std::string> encoders, holdouts, pairs, defenses;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("--config", o.config_path, "config file (key = value with [section] headers)");
  cmd->add_flag("--print-effective-config", o.print_effective, "print the resolved configuration and exit");
  for (const auto& b : flag_bindings())
    cmd->add_option("--" + b.flag, o.values[b.flag], b.section + "." + b.key)->group("Config keys");
  cmd->add_option("--encoder", o.encoders, "surrogate encoder as key=value,...; replaces the list")->group("Lists");
  cmd->add_option("--holdout", o.holdouts, "holdout encoder as key=value,...; replaces the list")->group("Lists");
  cmd->add_option("--pair", o.pairs, "source=PATH,target=PATH; replaces the list")->group("Lists");
  cmd->add_option("--defense", o.defenses, "defense as key=value,...; replaces the list")->group("Lists");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// defaults < file < FRA_OUTPUT_DIR < flags
RunConfig resolve(const CLI::App* cmd, const ConfigOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : parse_config(read_file(o.config_path));
  if (const char* env = std::getenv("FRA_OUTPUT_DIR"); env != nullptr && *env != '\0') cfg.output_dir = env;
  for (const auto& b : flag_bindings())
    if (cmd->count("--" + b.flag) > 0) apply_setting(cfg, b.section, b.key, o.values.at(b.flag), "--" + b.flag + ": ");
  auto replace = [&](const std::vector<std::string>& specs, const std::string& section, auto& list) {
    if (specs.empty()) return;
    list.clear();
    for (const auto& s : specs) append_entry(cfg, section, s, "--" + section + " '" + s + "': ");
  };
  replace(o.encoders, "encoder", cfg.ensemble);
  replace(o.holdouts, "holdout", cfg.holdouts);
  replace(o.pairs, "pair", cfg.pairs);
  replace(o.defenses, "defense", cfg.defenses);
  validate(cfg);
  return cfg;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << config_detail::format_real(m(r, c));
    out << "\n";
  }
}

int report(const BatchSummary& s, const RunConfig& cfg) {
  std::cerr << "pairs " << s.pairs << ", failed " << s.failed << ", budget violations " << s.budget_violations
            << "; results in " << cfg.output_dir << "\n";
  return s.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain feature alignment attack on toy encoders"};
  app.require_subcommand(1);

  ConfigOptions attack_opts, sweep_opts, defend_opts, map_opts;
  auto* attack = app.add_subcommand("attack", "attack every pair and evaluate on the holdout encoders");
  add_config_options(attack, attack_opts);
  auto* sweep = app.add_subcommand("sweep", "repeat the attack for each value of one attack.* or fgr.* key");
  add_config_options(sweep, sweep_opts);
  auto* defend = app.add_subcommand("defend-eval", "attack, then evaluate after each defense");
  add_config_options(defend, defend_opts);

  auto* emap = app.add_subcommand("energy-map", "per-patch high-frequency energy of one image");
  add_config_options(emap, map_opts);
  std::string map_image, map_out;
  emap->add_option("--image", map_image, "input image (PPM or FRAT)")->required();
  emap->add_option("--out", map_out, "output path; .frat writes a tensor, anything else CSV (default stdout)");

  auto* self = app.add_subcommand("selfcheck", "run quick invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto [cmd, opts] : {std::pair{attack, &attack_opts}, std::pair{sweep, &sweep_opts},
                             std::pair{defend, &defend_opts}, std::pair{emap, &map_opts}}) {
      if (!cmd->parsed()) continue;
      const RunConfig cfg = resolve(cmd, *opts);
      if (opts->print_effective) {
        std::cout << to_config_text(cfg);
        return 0;
      }
      if (cmd == attack) return report(run_batch(cfg, false), cfg);
      if (cmd == defend) return report(run_batch(cfg, true), cfg);
      if (cmd == sweep) return report(run_sweep(cfg), cfg);

      // energy-map uses the first surrogate encoder and attack.theta / attack.n
      const Matrix m = energy_map(load_image(map_image), cfg.ensemble.front(), cfg.attack.align.theta,
                                  cfg.attack.align.n);
      if (map_out.empty()) {
        write_matrix_csv(std::cout, m);
      } else if (map_out.size() >= 5 && map_out.compare(map_out.size() - 5, 5, ".frat") == 0) {
        save_tensor(map_out, Tensor({m.rows(), m.cols()}, m.data()));
      } else {
        std::ofstream out(map_out, std::ios::binary);
        if (!out) throw FormatError("cannot write " + map_out);
        write_matrix_csv(out, m);
      }
      return 0;
    }
    if (self->parsed()) {
      bool ok = true;
      for (const auto& c : run_selfchecks()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")")
                  << "\n";
        ok &= c.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

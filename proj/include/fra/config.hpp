#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fra/attack.hpp"
#include "fra/benchmark.hpp"
#include "fra/defenses.hpp"
#include "fra/encoders.hpp"
#include "fra/spectral.hpp"

namespace fra {

// Run configuration file format
// -----------------------------
//   # comment                 (also after values)
//   [attack]                  epsilon, alpha, iters, theta, n, w_g, w_l, lambda, mu, temperature,
//                             optimizer, adam_beta1, adam_beta2, adam_eps, sinkhorn_max_iters, sinkhorn_tol
//   [fgr]                     kind, p, beta, center, tau_low, tau_high, gamma_low, gamma_mid,
//                             gamma_high, keep_low, keep_mid, keep_high
//   [encoder]   (repeatable)  kind, patch_size, embed_dim, seed, height, width, channels, bias
//   [holdout]   (repeatable)  same keys as [encoder]
//   [pair]      (repeatable)  source, target
//   [defense]   (repeatable)  kind, quality, kernel, sigma, ratio
//   [run]                     output_dir, parallelism, master_seed, synthetic_pairs, save_images
//   [sweep]                   key (section.key, attack or fgr only), values (comma separated)
//
// Reals accept a fraction "a/b" (epsilon = 16/255). The first [encoder],
// [holdout] or [defense] section replaces the built-in list. Command-line
// flags use the key with '_' -> '-': attack keys as-is (--w-g), fgr keys with
// an "fgr-" prefix (--fgr-p), run keys as-is (--output-dir), sweep keys with
// a "sweep-" prefix; repeatable sections take "key=value,key=value" strings.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PairPaths {
  std::string source;
  std::string target;
};

struct SweepSpec {
  std::string key;                  // "section.key"
  std::vector<std::string> values;  // raw value strings
};

struct RunConfig {
  AttackConfig attack{};
  std::vector<EncoderSpec> ensemble = default_ensemble();
  std::vector<EncoderSpec> holdouts = {default_holdout()};
  std::vector<PairPaths> pairs;
  std::vector<DefenseSpec> defenses = {DefenseSpec::jpeg(), DefenseSpec::gaussian(), DefenseSpec::center_crop()};
  std::string output_dir = "fra_out";
  std::size_t parallelism = 1;
  std::uint64_t master_seed = 2024;
  std::size_t synthetic_pairs = 20;  // used when no [pair] is given
  bool save_images = true;
  std::optional<SweepSpec> sweep;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double strict_double(std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) throw DomainError("expected a real number, got '" + t + "'");
  if (!std::isfinite(v)) throw DomainError("value must be finite");
  return v;
}

inline double parse_real(std::string_view s) {
  const auto slash = s.find('/');
  if (slash == std::string_view::npos) return strict_double(s);
  const double den = strict_double(s.substr(slash + 1));
  if (den == 0.0) throw DomainError("division by zero in '" + std::string(s) + "'");
  return strict_double(s.substr(0, slash)) / den;
}

inline std::uint64_t parse_uint(std::string_view s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw DomainError("expected a non-negative integer, got '" + t + "'");
  return v;
}

inline bool parse_bool(std::string_view s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw DomainError("expected true or false, got '" + t + "'");
}

inline double positive(double v) {
  if (!(v > 0.0)) throw DomainError("must be > 0");
  return v;
}

inline double non_negative(double v) {
  if (!(v >= 0.0)) throw DomainError("must be >= 0");
  return v;
}

template <class T>
struct Key {
  std::string name;
  std::function<void(T&, std::string_view)> set;
  std::function<std::string(const T&)> get;
};

template <class T>
using KeyTable = std::vector<Key<T>>;

#define FRA_REAL_KEY(T, name, field, check)                                                            \
  Key<T> {                                                                                             \
    name, [](T& o, std::string_view v) { o.field = check(parse_real(v)); },                            \
        [](const T& o) { return format_real(o.field); }                                                \
  }
#define FRA_UINT_KEY(T, name, field, check)                                                            \
  Key<T> {                                                                                             \
    name, [](T& o, std::string_view v) { o.field = static_cast<decltype(o.field)>(check(parse_uint(v))); }, \
        [](const T& o) { return std::to_string(o.field); }                                             \
  }

inline std::uint64_t any_uint(std::uint64_t v) { return v; }
inline std::uint64_t positive_uint(std::uint64_t v) {
  if (v == 0) throw DomainError("must be >= 1");
  return v;
}
inline double any_real(double v) { return v; }
inline double unit_interval_open_left(double v) {
  if (!(v > 0.0 && v <= 1.0)) throw DomainError("must lie in (0, 1]");
  return v;
}
inline double open_unit(double v) {
  if (!(v > 0.0 && v < 1.0)) throw DomainError("must lie in (0, 1)");
  return v;
}
inline double percent(double v) {
  if (!(v >= 0.0 && v <= 100.0)) throw DomainError("must lie in [0, 100]");
  return v;
}

inline const KeyTable<AttackConfig>& attack_keys() {
  using T = AttackConfig;
  static const KeyTable<T> keys = {
      FRA_REAL_KEY(T, "epsilon", epsilon, unit_interval_open_left),
      FRA_REAL_KEY(T, "alpha", alpha, positive),
      FRA_UINT_KEY(T, "iters", iters, any_uint),
      FRA_UINT_KEY(T, "theta", align.theta, positive_uint),
      FRA_UINT_KEY(T, "n", align.n, positive_uint),
      FRA_REAL_KEY(T, "w_g", align.w_g, non_negative),
      FRA_REAL_KEY(T, "w_l", align.w_l, non_negative),
      FRA_REAL_KEY(T, "lambda", align.lambda, positive),
      FRA_REAL_KEY(T, "mu", mu, non_negative),
      FRA_REAL_KEY(T, "temperature", temperature, positive),
      Key<T>{"optimizer", [](T& o, std::string_view v) { o.optimizer = parse_optimizer(trim(v)); },
             [](const T& o) { return std::string(to_string(o.optimizer)); }},
      FRA_REAL_KEY(T, "adam_beta1", adam_beta1, open_unit),
      FRA_REAL_KEY(T, "adam_beta2", adam_beta2, open_unit),
      FRA_REAL_KEY(T, "adam_eps", adam_eps, positive),
      FRA_UINT_KEY(T, "sinkhorn_max_iters", align.sinkhorn.max_iters, positive_uint),
      FRA_REAL_KEY(T, "sinkhorn_tol", align.sinkhorn.tol, non_negative),
  };
  return keys;
}

inline const KeyTable<RadialFilter>& fgr_keys() {
  using T = RadialFilter;
  static const KeyTable<T> keys = {
      Key<T>{"kind", [](T& o, std::string_view v) { o.kind = parse_filter_kind(trim(v)); },
             [](const T& o) { return std::string(to_string(o.kind)); }},
      FRA_REAL_KEY(T, "p", p, non_negative),
      FRA_REAL_KEY(T, "beta", beta, non_negative),
      FRA_REAL_KEY(T, "center", center, any_real),
      FRA_REAL_KEY(T, "tau_low", tau_low, open_unit),
      FRA_REAL_KEY(T, "tau_high", tau_high, open_unit),
      FRA_REAL_KEY(T, "gamma_low", gamma[0], non_negative),
      FRA_REAL_KEY(T, "gamma_mid", gamma[1], non_negative),
      FRA_REAL_KEY(T, "gamma_high", gamma[2], non_negative),
      FRA_REAL_KEY(T, "keep_low", keep_percent[0], percent),
      FRA_REAL_KEY(T, "keep_mid", keep_percent[1], percent),
      FRA_REAL_KEY(T, "keep_high", keep_percent[2], percent),
  };
  return keys;
}

inline const KeyTable<EncoderSpec>& encoder_keys() {
  using T = EncoderSpec;
  static const KeyTable<T> keys = {
      Key<T>{"kind", [](T& o, std::string_view v) { o.kind = parse_encoder_kind(trim(v)); },
             [](const T& o) { return std::string(to_string(o.kind)); }},
      FRA_UINT_KEY(T, "patch_size", patch_size, positive_uint),
      FRA_UINT_KEY(T, "embed_dim", embed_dim, positive_uint),
      FRA_UINT_KEY(T, "seed", seed, any_uint),
      FRA_UINT_KEY(T, "height", height, positive_uint),
      FRA_UINT_KEY(T, "width", width, positive_uint),
      FRA_UINT_KEY(T, "channels", channels, positive_uint),
      Key<T>{"bias", [](T& o, std::string_view v) { o.bias = parse_bool(v); },
             [](const T& o) { return std::string(o.bias ? "true" : "false"); }},
  };
  return keys;
}

inline const KeyTable<DefenseSpec>& defense_keys() {
  using T = DefenseSpec;
  static const KeyTable<T> keys = {
      Key<T>{"kind", [](T& o, std::string_view v) { o.kind = parse_defense_kind(trim(v)); },
             [](const T& o) { return std::string(to_string(o.kind)); }},
      Key<T>{"quality",
             [](T& o, std::string_view v) {
               const auto q = parse_uint(v);
               if (q < 1 || q > 100) throw DomainError("must lie in [1, 100]");
               o.quality = static_cast<int>(q);
             },
             [](const T& o) { return std::to_string(o.quality); }},
      Key<T>{"kernel",
             [](T& o, std::string_view v) {
               const auto k = parse_uint(v);
               if (k % 2 == 0) throw DomainError("must be odd");
               o.kernel = static_cast<std::size_t>(k);
             },
             [](const T& o) { return std::to_string(o.kernel); }},
      FRA_REAL_KEY(T, "sigma", sigma, positive),
      FRA_REAL_KEY(T, "ratio", ratio, unit_interval_open_left),
  };
  return keys;
}

inline const KeyTable<PairPaths>& pair_keys() {
  using T = PairPaths;
  static const KeyTable<T> keys = {
      Key<T>{"source", [](T& o, std::string_view v) { o.source = trim(v); }, [](const T& o) { return o.source; }},
      Key<T>{"target", [](T& o, std::string_view v) { o.target = trim(v); }, [](const T& o) { return o.target; }},
  };
  return keys;
}

inline const KeyTable<RunConfig>& run_keys() {
  using T = RunConfig;
  static const KeyTable<T> keys = {
      Key<T>{"output_dir",
             [](T& o, std::string_view v) {
               o.output_dir = trim(v);
               if (o.output_dir.empty()) throw DomainError("must not be empty");
             },
             [](const T& o) { return o.output_dir; }},
      FRA_UINT_KEY(T, "parallelism", parallelism, positive_uint),
      FRA_UINT_KEY(T, "master_seed", master_seed, any_uint),
      FRA_UINT_KEY(T, "synthetic_pairs", synthetic_pairs, positive_uint),
      Key<T>{"save_images", [](T& o, std::string_view v) { o.save_images = parse_bool(v); },
             [](const T& o) { return std::string(o.save_images ? "true" : "false"); }},
  };
  return keys;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline const KeyTable<SweepSpec>& sweep_keys() {
  using T = SweepSpec;
  static const KeyTable<T> keys = {
      Key<T>{"key", [](T& o, std::string_view v) { o.key = trim(v); }, [](const T& o) { return o.key; }},
      Key<T>{"values", [](T& o, std::string_view v) { o.values = split_list(v); },
             [](const T& o) {
               std::string s;
               for (std::size_t i = 0; i < o.values.size(); ++i) s += (i ? ", " : "") + o.values[i];
               return s;
             }},
  };
  return keys;
}

#undef FRA_REAL_KEY
#undef FRA_UINT_KEY

template <class T>
const Key<T>* find_key(const KeyTable<T>& table, std::string_view name) {
  for (const auto& k : table)
    if (k.name == name) return &k;
  return nullptr;
}

template <class T>
std::string known_keys(const KeyTable<T>& table) {
  std::string s;
  for (const auto& k : table) s += (s.empty() ? "" : ", ") + k.name;
  return s;
}

template <class T>
void set_key(const KeyTable<T>& table, T& obj, const std::string& section, const std::string& key,
             std::string_view value, const std::string& where) {
  const Key<T>* k = find_key(table, key);
  if (k == nullptr)
    throw ConfigError(where + "unknown key '" + key + "' in [" + section + "] (known: " + known_keys(table) + ")");
  try {
    k->set(obj, value);
  } catch (const DomainError& e) {
    throw ConfigError(where + "key '" + section + "." + key + "': " + e.what());
  }
}

template <class T>
void dump_section(std::ostringstream& out, const std::string& section, const KeyTable<T>& table, const T& obj) {
  out << "[" << section << "]\n";
  for (const auto& k : table) out << k.name << " = " << k.get(obj) << "\n";
}

inline bool repeatable(const std::string& section) {
  return section == "encoder" || section == "holdout" || section == "pair" || section == "defense";
}

}  // namespace config_detail

/// Sets one key. `section` is one of the file sections; for repeatable sections the
/// last entry is modified.
inline void apply_setting(RunConfig& cfg, const std::string& section, const std::string& key, std::string_view value,
                          const std::string& where = "") {
  using namespace config_detail;
  if (section == "attack") return set_key(attack_keys(), cfg.attack, section, key, value, where);
  if (section == "fgr") return set_key(fgr_keys(), cfg.attack.fgr, section, key, value, where);
  if (section == "run") return set_key(run_keys(), cfg, section, key, value, where);
  if (section == "sweep") {
    if (!cfg.sweep) cfg.sweep.emplace();
    return set_key(sweep_keys(), *cfg.sweep, section, key, value, where);
  }
  if (section == "encoder") return set_key(encoder_keys(), cfg.ensemble.back(), section, key, value, where);
  if (section == "holdout") return set_key(encoder_keys(), cfg.holdouts.back(), section, key, value, where);
  if (section == "defense") return set_key(defense_keys(), cfg.defenses.back(), section, key, value, where);
  if (section == "pair") return set_key(pair_keys(), cfg.pairs.back(), section, key, value, where);
  throw ConfigError(where + "unknown section [" + section + "]");
}

/// Value of `section.key` for the single-valued sections (attack, fgr, run).
inline std::string get_setting(const RunConfig& cfg, const std::string& section, const std::string& key) {
  using namespace config_detail;
  auto lookup = [&](const auto& table, const auto& obj) -> std::string {
    const auto* k = find_key(table, key);
    if (k == nullptr) throw ConfigError("unknown key '" + section + "." + key + "'");
    return k->get(obj);
  };
  if (section == "attack") return lookup(attack_keys(), cfg.attack);
  if (section == "fgr") return lookup(fgr_keys(), cfg.attack.fgr);
  if (section == "run") return lookup(run_keys(), cfg);
  throw ConfigError("no single value for section [" + section + "]");
}

/// Splits "section.key".
inline std::pair<std::string, std::string> split_qualified_key(const std::string& qualified) {
  const auto dot = qualified.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == qualified.size())
    throw ConfigError("sweep key '" + qualified + "' must look like section.key");
  return {qualified.substr(0, dot), qualified.substr(dot + 1)};
}

/// Applies sweep value `value` to a copy of `base`.
inline RunConfig with_sweep_value(const RunConfig& base, const std::string& value) {
  if (!base.sweep) throw ConfigError("no [sweep] configured");
  const auto [section, key] = split_qualified_key(base.sweep->key);
  RunConfig out = base;
  apply_setting(out, section, key, value, "sweep value '" + value + "': ");
  return out;
}

/// Eager cross-field validation; `lines` maps "section.key" to the line that last set it.
inline void validate(const RunConfig& cfg, const std::map<std::string, std::size_t>& lines = {}) {
  auto at = [&](const std::string& k) {
    const auto it = lines.find(k);
    return it == lines.end() ? std::string() : " (line " + std::to_string(it->second) + ")";
  };
  auto fail = [&](const std::string& key, const std::string& what) { throw ConfigError("key '" + key + "'" + at(key) + ": " + what); };

  const auto& f = cfg.attack.fgr;
  if ((f.kind == FilterKind::band_clip || f.kind == FilterKind::top_k_sparse) && !(f.tau_low < f.tau_high))
    fail("fgr.tau_low", "must be below fgr.tau_high");
  try {
    cfg.attack.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("attack: ") + e.what());
  }
  if (!(cfg.attack.alpha > 0.0)) fail("attack.alpha", "must be > 0");
  if (cfg.ensemble.empty()) throw ConfigError("at least one [encoder] is required");

  auto check_encoder = [&](const EncoderSpec& s, const std::string& section, std::size_t i) {
    try {
      s.validate();
    } catch (const DomainError& e) {
      throw ConfigError("[" + section + "] #" + std::to_string(i + 1) + ": " + e.what());
    }
    if (cfg.attack.align.w_l > 0.0 && cfg.attack.align.theta + cfg.attack.align.n > s.patch_count())
      throw ConfigError("[" + section + "] #" + std::to_string(i + 1) + ": theta + n = " +
                        std::to_string(cfg.attack.align.theta + cfg.attack.align.n) + " exceeds its patch count " +
                        std::to_string(s.patch_count()) + " (keys attack.theta" + at("attack.theta") + ", attack.n" +
                        at("attack.n") + ")");
    const auto& first = cfg.ensemble.front();
    if (s.height != first.height || s.width != first.width || s.channels != first.channels)
      throw ConfigError("[" + section + "] #" + std::to_string(i + 1) + ": input size differs from the first encoder");
  };
  for (std::size_t i = 0; i < cfg.ensemble.size(); ++i) check_encoder(cfg.ensemble[i], "encoder", i);
  for (std::size_t i = 0; i < cfg.holdouts.size(); ++i) {
    EncoderSpec h = cfg.holdouts[i];
    check_encoder(h, "holdout", i);
    for (const auto& s : cfg.ensemble)
      if (s.seed == h.seed)
        throw ConfigError("[holdout] #" + std::to_string(i + 1) + ": seed " + std::to_string(h.seed) +
                          " collides with a surrogate encoder seed");
  }
  for (std::size_t i = 0; i < cfg.pairs.size(); ++i)
    if (cfg.pairs[i].source.empty() || cfg.pairs[i].target.empty())
      throw ConfigError("[pair] #" + std::to_string(i + 1) + ": both source and target are required");
  for (std::size_t i = 0; i < cfg.defenses.size(); ++i) {
    try {
      cfg.defenses[i].validate();
    } catch (const DomainError& e) {
      throw ConfigError("[defense] #" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (cfg.sweep) {
    if (cfg.sweep->key.empty()) fail("sweep.key", "is required when [sweep] is present");
    if (cfg.sweep->values.empty()) fail("sweep.values", "needs at least one value");
    const auto [section, key] = split_qualified_key(cfg.sweep->key);
    if (section != "attack" && section != "fgr") fail("sweep.key", "only attack.* and fgr.* keys can be swept");
    for (const auto& v : cfg.sweep->values) {
      RunConfig point = with_sweep_value(cfg, v);
      point.sweep.reset();
      validate(point);
    }
  }
}

/// Parses the line-oriented format above and validates the result.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::map<std::string, std::size_t> lines;
  std::string section;
  bool seen_encoder = false, seen_holdout = false, seen_defense = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto hash = raw.find('#');
    const std::string line = config_detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
      section = config_detail::trim(line.substr(1, line.size() - 2));
      if (section == "encoder") {
        if (!seen_encoder) cfg.ensemble.clear();
        seen_encoder = true;
        cfg.ensemble.emplace_back();
      } else if (section == "holdout") {
        if (!seen_holdout) cfg.holdouts.clear();
        seen_holdout = true;
        cfg.holdouts.emplace_back();
      } else if (section == "defense") {
        if (!seen_defense) cfg.defenses.clear();
        seen_defense = true;
        cfg.defenses.emplace_back();
      } else if (section == "pair") {
        cfg.pairs.emplace_back();
      } else if (section == "sweep") {
        if (!cfg.sweep) cfg.sweep.emplace();
      } else if (section != "attack" && section != "fgr" && section != "run") {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value, got '" + line + "'");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = config_detail::trim(line.substr(0, eq));
    apply_setting(cfg, section, key, line.substr(eq + 1), where);
    lines[section + "." + key] = line_no;
  }
  validate(cfg, lines);
  return cfg;
}

/// Canonical text form; parse_config(to_config_text(c)) reproduces c.
inline std::string to_config_text(const RunConfig& cfg) {
  using namespace config_detail;
  std::ostringstream out;
  dump_section(out, "attack", attack_keys(), cfg.attack);
  out << "\n";
  dump_section(out, "fgr", fgr_keys(), cfg.attack.fgr);
  for (const auto& e : cfg.ensemble) {
    out << "\n";
    dump_section(out, "encoder", encoder_keys(), e);
  }
  for (const auto& h : cfg.holdouts) {
    out << "\n";
    dump_section(out, "holdout", encoder_keys(), h);
  }
  for (const auto& p : cfg.pairs) {
    out << "\n";
    dump_section(out, "pair", pair_keys(), p);
  }
  for (const auto& d : cfg.defenses) {
    out << "\n";
    dump_section(out, "defense", defense_keys(), d);
  }
  out << "\n";
  dump_section(out, "run", run_keys(), cfg);
  if (cfg.sweep) {
    out << "\n";
    dump_section(out, "sweep", sweep_keys(), *cfg.sweep);
  }
  return out.str();
}

/// Flat "section.key" -> value view of the single-valued sections.
inline std::map<std::string, std::string> flat_settings(const RunConfig& cfg) {
  using namespace config_detail;
  std::map<std::string, std::string> out;
  for (const auto& k : attack_keys()) out["attack." + k.name] = k.get(cfg.attack);
  for (const auto& k : fgr_keys()) out["fgr." + k.name] = k.get(cfg.attack.fgr);
  for (const auto& k : run_keys()) out["run." + k.name] = k.get(cfg);
  return out;
}

/// Command-line flag spelling of a config key.
struct FlagBinding {
  std::string flag;  // without leading dashes
  std::string section;
  std::string key;
};

inline std::vector<FlagBinding> flag_bindings() {
  using namespace config_detail;
  auto kebab = [](std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
  };
  std::vector<FlagBinding> out;
  for (const auto& k : attack_keys()) out.push_back({kebab(k.name), "attack", k.name});
  for (const auto& k : fgr_keys()) out.push_back({"fgr-" + kebab(k.name), "fgr", k.name});
  for (const auto& k : run_keys()) out.push_back({kebab(k.name), "run", k.name});
  for (const auto& k : sweep_keys()) out.push_back({"sweep-" + kebab(k.name), "sweep", k.name});
  return out;
}

/// Parses "key=value,key=value" into a new entry of a repeatable section.
inline void append_entry(RunConfig& cfg, const std::string& section, std::string_view spec, const std::string& where) {
  if (section == "encoder") cfg.ensemble.emplace_back();
  else if (section == "holdout") cfg.holdouts.emplace_back();
  else if (section == "defense") cfg.defenses.emplace_back();
  else if (section == "pair") cfg.pairs.emplace_back();
  else throw ConfigError(where + "section [" + section + "] is not repeatable");
  for (const auto& item : config_detail::split_list(spec)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key=value, got '" + item + "'");
    apply_setting(cfg, section, config_detail::trim(item.substr(0, eq)), item.substr(eq + 1), where);
  }
}

}  // namespace fra

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fra/attack.hpp"
#include "fra/benchmark.hpp"
#include "fra/config.hpp"
#include "fra/defenses.hpp"
#include "fra/evaluation.hpp"
#include "fra/io.hpp"

namespace fra {

struct PairJob {
  std::size_t index = 0;
  std::string source_name;
  std::string target_name;
  Image source;
  Image target;
  std::string load_error;  // non-empty if the inputs could not be prepared
};

struct PairOutcome {
  std::size_t index = 0;
  std::string source_name;
  std::string target_name;
  bool ok = false;
  std::string error;
  AttackResult result;
  std::size_t budget_violations = 0;                // iterations with |delta|_inf > eps, plus out-of-range pixels
  std::vector<PairRecord> holdout;                  // one per holdout encoder
  std::vector<std::vector<PairRecord>> defended;    // [defense][holdout]
};

/// Loads the configured pairs, or builds `synthetic_pairs` seeded pairs when none are configured.
inline std::vector<PairJob> prepare_pairs(const RunConfig& cfg) {
  std::vector<PairJob> jobs;
  const EncoderSpec& shape = cfg.ensemble.front();
  if (cfg.pairs.empty()) {
    for (std::size_t i = 0; i < cfg.synthetic_pairs; ++i) {
      PairJob j;
      j.index = i;
      j.source_name = "synthetic:" + std::to_string(i) + ":source";
      j.target_name = "synthetic:" + std::to_string(i) + ":target";
      std::tie(j.source, j.target) = synthetic_pair(cfg.master_seed, i, shape.height, shape.width, shape.channels);
      jobs.push_back(std::move(j));
    }
    return jobs;
  }
  for (std::size_t i = 0; i < cfg.pairs.size(); ++i) {
    PairJob j;
    j.index = i;
    j.source_name = cfg.pairs[i].source;
    j.target_name = cfg.pairs[i].target;
    try {
      j.source = load_image(j.source_name);
      j.target = load_image(j.target_name);
      for (const Image* img : {&j.source, &j.target})
        if (img->height() != shape.height || img->width() != shape.width || img->channels() != shape.channels)
          throw FormatError("image is " + std::to_string(img->height()) + "x" + std::to_string(img->width()) + "x" +
                            std::to_string(img->channels()) + ", encoders expect " + std::to_string(shape.height) +
                            "x" + std::to_string(shape.width) + "x" + std::to_string(shape.channels));
    } catch (const std::exception& e) {
      j.load_error = e.what();
    }
    jobs.push_back(std::move(j));
  }
  return jobs;
}

/// Attack plus holdout (and optionally defended) evaluation for one pair. Never throws.
inline PairOutcome run_pair(const PairJob& job, const RunConfig& cfg, bool with_defenses) {
  PairOutcome o;
  o.index = job.index;
  o.source_name = job.source_name;
  o.target_name = job.target_name;
  if (!job.load_error.empty()) {
    o.error = job.load_error;
    return o;
  }
  try {
    o.result = run_attack(job.source, job.target, cfg.attack, cfg.ensemble);
    for (const auto& rec : o.result.trace)
      if (rec.delta_linf > cfg.attack.epsilon) ++o.budget_violations;
    for (double v : o.result.adversarial.data())
      if (!(v >= 0.0 && v <= 1.0)) ++o.budget_violations;
    std::vector<Encoder> holdouts;
    for (const auto& h : cfg.holdouts) {
      check_holdout_disjoint(h, cfg.ensemble);
      holdouts.emplace_back(h);
    }
    for (const auto& h : holdouts) o.holdout.push_back(holdout_similarity(h, o.result.adversarial, job.source, job.target));
    if (with_defenses)
      for (const auto& d : cfg.defenses) {
        const Image defended = defend(o.result.adversarial, d);
        auto& row = o.defended.emplace_back();
        for (const auto& h : holdouts) row.push_back(holdout_similarity(h, defended, job.source, job.target));
      }
    o.ok = true;
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

/// Runs `count` independent tasks on up to `parallelism` threads; results keep task order.
template <class Result, class Task>
std::vector<Result> run_parallel(std::size_t count, std::size_t parallelism, Task&& task) {
  std::vector<Result> results(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) results[i] = task(i);
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(parallelism, count));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

// ---------------------------------------------------------------------------
// report writers

namespace batch_detail {

inline std::string real(double v) { return config_detail::format_real(v); }

// CSV field: quoted when it contains a separator, quote or newline.
inline std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline nlohmann::json trace_json(const TraceRecord& r) {
  return {{"iteration", r.iteration},          {"losses", r.losses},
          {"global_terms", r.global_terms},    {"freq_terms", r.freq_terms},
          {"weights", r.weights},              {"total_loss", r.total_loss},
          {"grad_l1", r.grad_l1},              {"filtered_grad_l1", r.filtered_grad_l1},
          {"delta_linf", r.delta_linf},        {"warnings", r.warnings}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

inline std::string pair_file(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%04zu%s", index, ext);
  return buf;
}

}  // namespace batch_detail

inline const char* kMetricsHeader = "# fra-metrics v1";
inline const char* kSweepHeader = "# fra-sweep v1";

/// One row per (pair, holdout, defense); defense "none" is the undefended image.
/// `prefix` is prepended verbatim to every data row (sweep point columns).
inline void append_metrics_rows(std::ostringstream& out, const std::vector<PairOutcome>& outcomes,
                                const RunConfig& cfg, const std::string& prefix = "") {
  using batch_detail::field;
  using batch_detail::real;
  for (const auto& o : outcomes) {
    const std::string lead = prefix + std::to_string(o.index) + "," + field(o.source_name) + "," + field(o.target_name);
    if (!o.ok) {
      out << lead << "," << field("failed: " + o.error) << ",,,,,,,,,\n";
      continue;
    }
    const auto& trace = o.result.trace;
    const std::string run_cols = "ok," + std::to_string(trace.size()) + "," +
                                 (trace.empty() ? std::string() : real(trace.back().total_loss)) + "," +
                                 real(linf_norm(o.result.delta)) + "," + std::to_string(o.budget_violations);
    auto emit = [&](const std::string& defense, const std::vector<PairRecord>& recs) {
      for (std::size_t h = 0; h < recs.size(); ++h)
        out << lead << "," << run_cols << "," << h << "," << field(defense) << "," << real(recs[h].sim_adv_target) << ","
            << real(recs[h].sim_adv_source) << "," << (recs[h].success ? 1 : 0) << "\n";
    };
    emit("none", o.holdout);
    for (std::size_t d = 0; d < o.defended.size(); ++d) emit(cfg.defenses[d].label(), o.defended[d]);
  }
}

inline const char* kMetricsColumns =
    "pair,source,target,status,iters,final_total_loss,final_delta_linf,budget_violations,holdout,defense,"
    "sim_adv_target,sim_adv_source,success";

/// Aggregate report for one holdout and one defense column (-1 = undefended).
inline TransferReport aggregate(const std::vector<PairOutcome>& outcomes, std::size_t holdout, int defense) {
  std::vector<PairRecord> recs;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    recs.push_back(defense < 0 ? o.holdout[holdout] : o.defended[static_cast<std::size_t>(defense)][holdout]);
  }
  return summarize(std::move(recs));
}

struct BatchSummary {
  std::size_t pairs = 0;
  std::size_t failed = 0;
  std::size_t budget_violations = 0;
  int exit_code() const { return pairs > 0 && failed == pairs ? 1 : 0; }
};

inline BatchSummary tally(const std::vector<PairOutcome>& outcomes) {
  BatchSummary s;
  s.pairs = outcomes.size();
  for (const auto& o : outcomes) {
    s.failed += o.ok ? 0 : 1;
    s.budget_violations += o.budget_violations;
  }
  return s;
}

inline std::string summary_text(const std::vector<PairOutcome>& outcomes, const RunConfig& cfg) {
  std::ostringstream out;
  const auto t = tally(outcomes);
  out << "pairs " << t.pairs << ", failed " << t.failed << ", budget violations " << t.budget_violations << "\n";
  for (const auto& o : outcomes)
    if (!o.ok) out << "  pair " << o.index << " failed: " << o.error << "\n";
  if (t.failed == t.pairs) return out.str();
  const std::size_t ndef = outcomes.front().ok ? outcomes.front().defended.size() : cfg.defenses.size();
  for (std::size_t h = 0; h < cfg.holdouts.size(); ++h)
    for (int d = -1; d < static_cast<int>(ndef); ++d) {
      const auto r = aggregate(outcomes, h, d);
      out << "holdout " << h << " defense " << (d < 0 ? std::string("none") : cfg.defenses[d].label())
          << ": mean_sim " << batch_detail::real(r.mean_sim) << ", success_rate " << batch_detail::real(r.success_rate)
          << "\n";
    }
  return out.str();
}

inline void write_pair_artifacts(const std::filesystem::path& dir, const std::vector<PairOutcome>& outcomes,
                                 bool save_images) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "traces");
  if (save_images) fs::create_directories(dir / "adversarial");
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    std::string lines;
    for (const auto& rec : o.result.trace) lines += batch_detail::trace_json(rec).dump() + "\n";
    batch_detail::write_text(dir / "traces" / batch_detail::pair_file(o.index, ".jsonl"), lines);
    if (save_images) save_image(dir / "adversarial" / batch_detail::pair_file(o.index, ".ppm"), o.result.adversarial);
  }
}

/// Attacks every pair and writes metrics.csv, summary.txt, effective_config.txt, traces/ and adversarial/.
inline BatchSummary run_batch(const RunConfig& cfg, bool with_defenses) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  batch_detail::write_text(dir / "effective_config.txt", to_config_text(cfg));

  const auto jobs = prepare_pairs(cfg);
  const auto outcomes = run_parallel<PairOutcome>(jobs.size(), cfg.parallelism,
                                                  [&](std::size_t i) { return run_pair(jobs[i], cfg, with_defenses); });

  std::ostringstream csv;
  csv << kMetricsHeader << "\n" << kMetricsColumns << "\n";
  append_metrics_rows(csv, outcomes, cfg);
  batch_detail::write_text(dir / "metrics.csv", csv.str());
  batch_detail::write_text(dir / "summary.txt", summary_text(outcomes, cfg));
  write_pair_artifacts(dir, outcomes, cfg.save_images);
  return tally(outcomes);
}

/// Runs every sweep point over the same pairs; writes sweep.csv, metrics.csv,
/// effective_configs.jsonl and per-point traces.
inline BatchSummary run_sweep(const RunConfig& cfg, bool with_defenses = false) {
  namespace fs = std::filesystem;
  if (!cfg.sweep) throw ConfigError("sweep: no [sweep] section or --sweep-key/--sweep-values given");
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  batch_detail::write_text(dir / "effective_config.txt", to_config_text(cfg));

  const auto& values = cfg.sweep->values;
  std::vector<RunConfig> points;
  for (const auto& v : values) {
    RunConfig p = with_sweep_value(cfg, v);
    p.sweep.reset();
    points.push_back(std::move(p));
  }
  const auto jobs = prepare_pairs(cfg);
  const std::size_t per_point = jobs.size();
  const auto flat = run_parallel<PairOutcome>(points.size() * per_point, cfg.parallelism, [&](std::size_t t) {
    return run_pair(jobs[t % per_point], points[t / per_point], with_defenses);
  });

  std::ostringstream sweep_csv, metrics_csv, configs;
  sweep_csv << kSweepHeader << "\n"
            << "point,key,value,holdout,pairs_ok,pairs_failed,mean_sim,success_rate,mean_final_loss,max_delta_linf,"
               "budget_violations\n";
  metrics_csv << kMetricsHeader << "\n" << "point,value," << kMetricsColumns << "\n";
  BatchSummary total;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const std::vector<PairOutcome> outcomes(flat.begin() + static_cast<std::ptrdiff_t>(p * per_point),
                                            flat.begin() + static_cast<std::ptrdiff_t>((p + 1) * per_point));
    const auto t = tally(outcomes);
    total.pairs += t.pairs;
    total.failed += t.failed;
    total.budget_violations += t.budget_violations;

    double loss_sum = 0.0, max_linf = 0.0;
    std::size_t with_trace = 0;
    for (const auto& o : outcomes) {
      if (!o.ok) continue;
      max_linf = std::max(max_linf, linf_norm(o.result.delta));
      if (!o.result.trace.empty()) {
        loss_sum += o.result.trace.back().total_loss;
        ++with_trace;
      }
    }
    const std::string value_field = batch_detail::field(values[p]);
    for (std::size_t h = 0; h < cfg.holdouts.size(); ++h) {
      const auto r = aggregate(outcomes, h, -1);
      sweep_csv << p << "," << cfg.sweep->key << "," << value_field << "," << h << "," << (t.pairs - t.failed) << ","
                << t.failed << "," << batch_detail::real(r.mean_sim) << "," << batch_detail::real(r.success_rate)
                << "," << (with_trace ? batch_detail::real(loss_sum / static_cast<double>(with_trace)) : "") << ","
                << batch_detail::real(max_linf) << "," << t.budget_violations << "\n";
    }
    append_metrics_rows(metrics_csv, outcomes, points[p], std::to_string(p) + "," + value_field + ",");

    nlohmann::json rec = {{"point", p}, {"key", cfg.sweep->key}, {"value", values[p]}};
    rec["settings"] = flat_settings(points[p]);
    configs << rec.dump() << "\n";

    char sub[32];
    std::snprintf(sub, sizeof sub, "point_%02zu", p);
    write_pair_artifacts(dir / sub, outcomes, cfg.save_images);
  }
  batch_detail::write_text(dir / "sweep.csv", sweep_csv.str());
  batch_detail::write_text(dir / "metrics.csv", metrics_csv.str());
  batch_detail::write_text(dir / "effective_configs.jsonl", configs.str());
  return total;
}

}  // namespace fra

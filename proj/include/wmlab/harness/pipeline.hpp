#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/harness/attack.hpp"
#include "wmlab/harness/config.hpp"
#include "wmlab/harness/io.hpp"
#include "wmlab/stats/stats.hpp"

namespace wmlab::harness {

// Stream labels for derive_seed. The attack stream never touches a key.
inline constexpr std::uint64_t kCellStream = 0x100;
inline constexpr std::uint64_t kKeyStream = 1;
inline constexpr std::uint64_t kGenStream = 2;
inline constexpr std::uint64_t kAttackStream = 0xA77AC;

inline constexpr double kBandLo = 0.4;
inline constexpr double kBandHi = 0.6;

struct CorpusRow {
  std::string id;
  std::size_t cell = 0;
  std::string task_id;
  std::uint64_t key = 0;
  std::uint64_t seed = 0;
  bool watermarked = false;
  lang::TokenSeq tokens;
  std::int64_t t_used = -1;  // -1: not attacked
  bool t_exact = true;

  lang::Program program() const { return lang::parse(tokens); }
};

struct DetectionRow {
  std::string id;
  std::size_t cell = 0;
  bool watermarked = false;
  std::string stage;  // before | after
  std::string task_id;
  double z = 0;
  double p = 1;
  int bit = 0;
  std::size_t scored = 0;
  bool passed = false;
};

/// Labels of the configured scheme cells; duplicates are a config error.
inline std::vector<std::string> cell_labels(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : cfg.schemes) {
    auto l = cell_label(s.params);
    if (std::find(out.begin(), out.end(), l) != out.end()) throw ConfigError("duplicate scheme cell " + l);
    out.push_back(l);
  }
  return out;
}

inline std::map<std::string, model::TaskBundle> bundle_map(const ExperimentConfig& cfg) {
  std::map<std::string, model::TaskBundle> m;
  for (auto& b : cfg.bundles()) m.emplace(b.task.id, b);
  return m;
}

inline constexpr int kIdealRetries = 16;

/// Watermarked and unwatermarked samples for every cell. Sample i of a cell
/// answers task i mod |tasks|.
inline std::vector<CorpusRow> generate_corpus(const ExperimentConfig& cfg) {
  const auto bundles = cfg.bundles();
  cell_labels(cfg);
  const std::size_t per_cell = 2 * cfg.trials;
  std::vector<CorpusRow> rows(cfg.schemes.size() * per_cell);
  parallel_for(rows.size(), [&](std::size_t slot) {
    const std::size_t c = slot / per_cell, j = slot % per_cell, i = j / 2;
    const bool wm = j % 2 == 0;
    const auto& b = bundles[i % bundles.size()];
    const auto& params = cfg.schemes[c].params;
    CorpusRow& r = rows[slot];
    r.cell = c;
    r.id = "c" + std::to_string(c) + (wm ? "-w-" : "-u-") + std::to_string(i);
    r.task_id = b.task.id;
    r.watermarked = wm;
    r.seed = derive_seed(derive_seed(cfg.master_seed, kCellStream + c), j);
    r.key = derive_seed(r.seed, kKeyStream);
    Rng rng(derive_seed(r.seed, kGenStream));
    const watermark::Key key{r.key};
    if (!wm) {
      r.tokens = model::generate(b.tmpl, rng).tokens();
    } else if (params.scheme == watermark::Scheme::Ideal) {
      for (int a = 0; a < kIdealRetries && r.tokens.empty(); ++a) {
        auto sel = watermark::ideal_watermark(b.task, b.tmpl, params.t_gen, key, rng, params.n_gram);
        if (sel) r.tokens = sel->program.tokens();
      }
      if (r.tokens.empty()) throw InvalidArgument("ideal scheme found no passing candidate for " + b.task.id);
    } else {
      r.tokens = watermark::generate_watermarked(b.tmpl, params, key, rng).tokens();
    }
  });
  return rows;
}

/// Walk length for one row under the configured policy.
inline AttackLength attack_length(const ExperimentConfig& cfg, const lang::Program& p, SpaceCache& cache) {
  if (!cfg.attack.automatic) return {cfg.attack.steps, true};
  return cache.length(p, cfg.attack.epsilon);
}

/// Random walk on every row. The walk seed depends on the master seed and
/// the row id only, so the attacker is blind to the key.
inline std::vector<CorpusRow> attack_corpus(const std::vector<CorpusRow>& rows, const ExperimentConfig& cfg,
                                            SpaceCache& cache) {
  std::vector<CorpusRow> out = rows;
  const auto stream = derive_seed(cfg.master_seed, kAttackStream);
  parallel_for(out.size(), [&](std::size_t i) {
    auto p = rows[i].program();
    auto len = attack_length(cfg, p, cache);
    Rng rng(derive_seed(stream, string_hash(rows[i].id)));
    out[i].tokens = rules::random_walk(p, cache.rule_set(), len.t, rng).tokens();
    out[i].t_used = len.t;
    out[i].t_exact = len.exact;
  });
  return out;
}

inline std::vector<CorpusRow> attack_corpus(const std::vector<CorpusRow>& rows, const ExperimentConfig& cfg) {
  SpaceCache cache(cfg.rule_set, cfg.cap);
  return attack_corpus(rows, cfg, cache);
}

/// Threshold whose null exceedance rate is at most epsilon_pos: just above
/// the empirical (1 - epsilon_pos) quantile of the null z-scores. Falls back
/// to the normal quantile when there are too few nulls.
inline double empirical_threshold(std::vector<double> null_z, double epsilon_pos) {
  const auto n = null_z.size();
  if (static_cast<double>(n) * epsilon_pos < 1) return watermark::calibrate_threshold(epsilon_pos);
  std::sort(null_z.begin(), null_z.end());
  const auto allowed = static_cast<std::size_t>(std::floor(epsilon_pos * static_cast<double>(n)));
  return std::nextafter(null_z[n - allowed - 1], INFINITY);
}

inline DetectionRow detect_row(const CorpusRow& r, const std::string& stage, const watermark::SchemeParams& params,
                               const model::TaskBundle& b, double threshold) {
  const auto p = r.program();
  DetectionRow d{r.id, r.cell, r.watermarked, stage, r.task_id};
  try {
    auto res = watermark::detect(p, params, watermark::Key{r.key}, &b.tmpl, threshold);
    d.z = res.z;
    d.p = res.p;
    d.bit = res.bit;
    d.scored = res.scored_tokens;
  } catch (const watermark::TooShort&) {
    d.z = 0;
    d.p = 1;
  }
  d.passed = lang::run_test_suite(b.task, p);
  return d;
}

/// Scores the corpus and, if given, its attacked copy. Each cell's
/// threshold is calibrated on that cell's unattacked null rows.
inline std::vector<DetectionRow> detect_corpus(const std::vector<CorpusRow>& before,
                                               const std::vector<CorpusRow>* after, const ExperimentConfig& cfg) {
  const auto bm = bundle_map(cfg);
  auto bundle = [&](const std::string& id) -> const model::TaskBundle& {
    auto it = bm.find(id);
    if (it == bm.end()) throw ConfigError("corpus task '" + id + "' is not configured");
    return it->second;
  };
  std::vector<DetectionRow> out(before.size() + (after ? after->size() : 0));
  auto score = [&](const std::vector<CorpusRow>& rows, std::size_t offset, const std::string& stage,
                   const std::vector<double>& thr) {
    parallel_for(rows.size(), [&](std::size_t i) {
      const auto& r = rows[i];
      if (r.cell >= cfg.schemes.size()) throw ConfigError("corpus cell index out of range");
      out[offset + i] = detect_row(r, stage, cfg.schemes[r.cell].params, bundle(r.task_id), thr[r.cell]);
    });
  };
  // analytic pass first to collect null z per cell, then recalibrate
  std::vector<double> analytic;
  for (const auto& s : cfg.schemes) analytic.push_back(watermark::calibrate_threshold(s.epsilon_pos));
  score(before, 0, "before", analytic);
  std::vector<std::vector<double>> nulls(cfg.schemes.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (!before[i].watermarked) nulls[before[i].cell].push_back(out[i].z);
  }
  std::vector<double> thr(cfg.schemes.size());
  for (std::size_t c = 0; c < thr.size(); ++c) thr[c] = empirical_threshold(nulls[c], cfg.schemes[c].epsilon_pos);
  for (std::size_t i = 0; i < before.size(); ++i) out[i].bit = out[i].z >= thr[before[i].cell] ? 1 : 0;
  if (after) score(*after, before.size(), "after", thr);
  return out;
}

// ---------------------------------------------------------------------------
// Per-cell summary

struct CellSummary {
  std::string cell;
  std::string scheme;
  std::size_t n_watermarked = 0;
  double pass_before = NAN, pass_after = NAN;
  double auroc_before = NAN, auroc_after = NAN, auroc_null = NAN;
  double detect_before = NAN, detect_after = NAN;
  bool in_band = false;
};

inline std::vector<CellSummary> summarize(const std::vector<DetectionRow>& rows, const std::vector<std::string>& labels,
                                          const ExperimentConfig& cfg) {
  std::vector<CellSummary> out;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    CellSummary s;
    s.cell = labels[c];
    s.scheme = watermark::to_string(cfg.schemes[c].params.scheme);
    std::vector<double> zb, za, zn;
    std::vector<int> pb, pa, db, da;
    for (const auto& r : rows) {
      if (r.cell != c) continue;
      const bool before = r.stage == "before";
      (before ? pb : pa).push_back(r.passed);
      if (!r.watermarked) {
        if (before) zn.push_back(r.z);
        continue;
      }
      (before ? zb : za).push_back(r.z);
      (before ? db : da).push_back(r.bit);
    }
    s.n_watermarked = zb.size();
    if (!pb.empty()) s.pass_before = lang::pass_at_1(pb);
    if (!pa.empty()) s.pass_after = lang::pass_at_1(pa);
    if (!zb.empty()) s.auroc_before = stats::auroc_vs_null(zb);
    if (!za.empty()) s.auroc_after = stats::auroc_vs_null(za);
    if (!zn.empty()) s.auroc_null = stats::auroc_vs_null(zn);
    if (!db.empty()) s.detect_before = stats::empirical_rate(db).value;
    if (!da.empty()) s.detect_after = stats::empirical_rate(da).value;
    s.in_band = s.auroc_after > kBandLo && s.auroc_after < kBandHi;
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV forms

inline const Row kCorpusHeader = {"id", "cell", "task_id", "scheme", "key", "seed", "watermarked", "source"};
inline const Row kAttackedHeader = {"id",          "cell",   "task_id", "scheme", "key", "seed",
                                    "watermarked", "source", "t_used",  "t_exact"};
inline const Row kDetectionHeader = {"id", "cell", "watermarked", "stage", "task_id", "scheme",
                                     "z",  "p",    "bit",         "scored_tokens", "passed"};
inline const Row kSummaryHeader = {"cell",         "scheme",      "n_watermarked", "pass_before", "pass_after",
                                   "auroc_before", "auroc_after", "auroc_null",    "detect_before",
                                   "detect_after", "in_band"};

inline std::string fmt_opt(double x) { return std::isnan(x) ? "" : fmt(x); }

inline Table corpus_table(const std::vector<CorpusRow>& rows, const std::vector<std::string>& labels, bool attacked,
                          const ExperimentConfig& cfg) {
  Table t{attacked ? kAttackedHeader : kCorpusHeader, {}};
  for (const auto& r : rows) {
    Row row = {r.id,
               labels.at(r.cell),
               r.task_id,
               watermark::to_string(cfg.schemes.at(r.cell).params.scheme),
               std::to_string(r.key),
               std::to_string(r.seed),
               r.watermarked ? "1" : "0",
               lang::to_text(r.tokens)};
    if (attacked) {
      row.push_back(std::to_string(r.t_used));
      row.push_back(r.t_exact ? "exact" : "approx");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::size_t cell_index(const std::vector<std::string>& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ConfigError("corpus cell '" + label + "' is not configured");
  return static_cast<std::size_t>(it - labels.begin());
}

inline std::vector<CorpusRow> corpus_from_table(const Table& t, const std::vector<std::string>& labels) {
  const auto ci = t.column("id"), cc = t.column("cell"), ct = t.column("task_id"), ck = t.column("key"),
             cs = t.column("seed"), cw = t.column("watermarked"), csrc = t.column("source");
  const bool attacked = std::find(t.header.begin(), t.header.end(), "t_used") != t.header.end();
  std::vector<CorpusRow> out;
  for (const auto& r : t.rows) {
    CorpusRow c;
    c.id = r[ci];
    c.cell = cell_index(labels, r[cc]);
    c.task_id = r[ct];
    c.key = std::stoull(r[ck]);
    c.seed = std::stoull(r[cs]);
    c.watermarked = r[cw] == "1";
    c.tokens = lang::lex(r[csrc]);
    if (attacked) {
      c.t_used = std::stoll(r[t.column("t_used")]);
      c.t_exact = r[t.column("t_exact")] == "exact";
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline Table detection_table(const std::vector<DetectionRow>& rows, const std::vector<std::string>& labels,
                             const ExperimentConfig& cfg) {
  Table t{kDetectionHeader, {}};
  for (const auto& d : rows) {
    t.rows.push_back({d.id, labels.at(d.cell), d.watermarked ? "1" : "0", d.stage, d.task_id,
                      watermark::to_string(cfg.schemes.at(d.cell).params.scheme), fmt(d.z), fmt(d.p),
                      std::to_string(d.bit), std::to_string(d.scored), d.passed ? "1" : "0"});
  }
  return t;
}

inline std::vector<DetectionRow> detections_from_table(const Table& t, const std::vector<std::string>& labels) {
  const auto ci = t.column("id"), cc = t.column("cell"), cw = t.column("watermarked"), cs = t.column("stage"),
             ct = t.column("task_id"), cz = t.column("z"), cp = t.column("p"), cb = t.column("bit"),
             cn = t.column("scored_tokens"), cpass = t.column("passed");
  std::vector<DetectionRow> out;
  for (const auto& r : t.rows) {
    out.push_back({r[ci], cell_index(labels, r[cc]), r[cw] == "1", r[cs], r[ct], std::stod(r[cz]), std::stod(r[cp]),
                   std::stoi(r[cb]), std::stoul(r[cn]), r[cpass] == "1"});
  }
  return out;
}

inline Table summary_table(const std::vector<CellSummary>& cells) {
  Table t{kSummaryHeader, {}};
  for (const auto& s : cells) {
    t.rows.push_back({s.cell, s.scheme, std::to_string(s.n_watermarked), fmt_opt(s.pass_before),
                      fmt_opt(s.pass_after), fmt_opt(s.auroc_before), fmt_opt(s.auroc_after), fmt_opt(s.auroc_null),
                      fmt_opt(s.detect_before), fmt_opt(s.detect_after), s.in_band ? "1" : "0"});
  }
  return t;
}

inline nlohmann::json json_opt(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

inline nlohmann::json summary_json(const std::vector<CellSummary>& cells, std::uint64_t seed) {
  auto arr = nlohmann::json::array();
  std::size_t with_after = 0, in_band = 0;
  for (const auto& s : cells) {
    arr.push_back({{"cell", s.cell},
                   {"scheme", s.scheme},
                   {"n_watermarked", s.n_watermarked},
                   {"pass_before", json_opt(s.pass_before)},
                   {"pass_after", json_opt(s.pass_after)},
                   {"auroc_before", json_opt(s.auroc_before)},
                   {"auroc_after", json_opt(s.auroc_after)},
                   {"auroc_null", json_opt(s.auroc_null)},
                   {"detect_before", json_opt(s.detect_before)},
                   {"detect_after", json_opt(s.detect_after)},
                   {"in_band", s.in_band}});
    if (!std::isnan(s.auroc_after)) {
      ++with_after;
      in_band += s.in_band;
    }
  }
  return {{"master_seed", seed},
          {"cells", arr},
          {"band", {kBandLo, kBandHi}},
          {"cells_with_after", with_after},
          {"in_band_fraction", with_after ? nlohmann::json(static_cast<double>(in_band) / static_cast<double>(with_after))
                                          : nlohmann::json(nullptr)}};
}

// ---------------------------------------------------------------------------
// File-level commands. Every file name embeds the master seed.

inline std::filesystem::path seeded(const std::filesystem::path& dir, const std::string& stem, std::uint64_t seed,
                                    const std::string& ext) {
  return dir / (stem + "_" + std::to_string(seed) + ext);
}

inline void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto labels = cell_labels(cfg);
  write_csv(seeded(out, "corpus", cfg.master_seed, ".csv"), corpus_table(generate_corpus(cfg), labels, false, cfg));
  write_file(seeded(out, "config", cfg.master_seed, ".json"), config_to_json(cfg).dump(2) + "\n");
}

inline void cmd_attack(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto labels = cell_labels(cfg);
  auto rows = corpus_from_table(read_csv(seeded(out, "corpus", cfg.master_seed, ".csv")), labels);
  write_csv(seeded(out, "attacked", cfg.master_seed, ".csv"), corpus_table(attack_corpus(rows, cfg), labels, true, cfg));
}

inline void cmd_detect(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto labels = cell_labels(cfg);
  auto before = corpus_from_table(read_csv(seeded(out, "corpus", cfg.master_seed, ".csv")), labels);
  std::optional<std::vector<CorpusRow>> after;
  const auto ap = seeded(out, "attacked", cfg.master_seed, ".csv");
  if (std::filesystem::exists(ap)) after = corpus_from_table(read_csv(ap), labels);
  auto rows = detect_corpus(before, after ? &*after : nullptr, cfg);
  write_csv(seeded(out, "detections", cfg.master_seed, ".csv"), detection_table(rows, labels, cfg));
}

/// Missing detections give header-only outputs.
inline std::vector<CellSummary> cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto labels = cell_labels(cfg);
  std::vector<CellSummary> cells;
  const auto dp = seeded(out, "detections", cfg.master_seed, ".csv");
  if (std::filesystem::exists(dp)) {
    auto rows = detections_from_table(read_csv(dp), labels);
    if (!rows.empty()) cells = summarize(rows, labels, cfg);
  }
  write_csv(seeded(out, "summary", cfg.master_seed, ".csv"), summary_table(cells));
  write_file(seeded(out, "summary", cfg.master_seed, ".json"), summary_json(cells, cfg.master_seed).dump(2) + "\n");
  return cells;
}

}  // namespace wmlab::harness

#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/model/catalog.hpp"
#include "wmlab/rules/rules.hpp"
#include "wmlab/watermark/scheme.hpp"

namespace wmlab::harness {

/// Short label for a scheme cell, e.g. "greenred/n5/g0.25/d4".
inline std::string cell_label(const watermark::SchemeParams& p) {
  auto num = [](double x) {
    std::ostringstream ss;
    ss << x;
    return ss.str();
  };
  std::string s = watermark::to_string(p.scheme) + "/n" + std::to_string(p.n_gram);
  switch (p.scheme) {
    case watermark::Scheme::GreenRed: return s + "/g" + num(p.gamma) + "/d" + num(p.delta);
    case watermark::Scheme::Sweet: return s + "/g" + num(p.gamma) + "/d" + num(p.delta) + "/t" + num(p.tau);
    case watermark::Scheme::SynthId: return s + "/m" + std::to_string(p.rounds);
    case watermark::Scheme::Ideal: return s + "/tg" + std::to_string(p.t_gen);
  }
  return s;
}

/// Attack length: a fixed step count, or "auto" = t_c(epsilon).
struct AttackPolicy {
  bool automatic = true;
  std::int64_t steps = 0;
  double epsilon = 0.01;
};

struct ConsistencySettings {
  std::size_t samples = 100;
  std::size_t members = 30;
  double denormalize_mean_per_receptor = 8.0;
  bool duplicates_on_small_space = false;  // else SpaceTooSmall samples are excluded
};

struct ImpossibilitySettings {
  std::size_t trials = 5000;
  std::size_t null_trials = 5000;
};

/// Everything one run needs; the master seed fixes the whole pipeline.
struct ExperimentConfig {
  std::string catalog = "default";  // default | compact
  std::vector<std::string> tasks;   // empty: every task of the catalog
  model::TemplatePools pools;
  std::vector<watermark::SchemeConfig> schemes;
  rules::RuleSet rule_set = rules::RuleSet::ergodic();
  AttackPolicy attack;
  std::size_t trials = 100;
  double epsilon_pos = 0.05;
  std::uint64_t master_seed = 1;
  std::size_t cap = 5000;
  ConsistencySettings consistency;
  ImpossibilitySettings impossibility;

  std::vector<model::TaskBundle> bundles() const {
    const auto& cat = catalog == "compact" ? model::compact_catalog() : model::default_catalog();
    if (tasks.empty()) return model::bundles(cat, pools);
    std::vector<model::CatalogEntry> picked;
    for (const auto& id : tasks) {
      auto it = std::find_if(cat.begin(), cat.end(), [&](const model::CatalogEntry& e) { return e.id == id; });
      if (it == cat.end()) throw ConfigError("task '" + id + "' is not in the " + catalog + " catalog");
      picked.push_back(*it);
    }
    return model::bundles(picked, pools);
  }

  void validate() const {
    if (catalog != "default" && catalog != "compact") throw ConfigError("catalog must be default or compact");
    if (schemes.empty()) throw ConfigError("at least one scheme is required");
    if (!(epsilon_pos > 0 && epsilon_pos < 1)) throw ConfigError("epsilon_pos must lie in (0,1)");
    if (!(attack.epsilon > 0 && attack.epsilon < 1)) throw ConfigError("attack epsilon must lie in (0,1)");
    if (!attack.automatic && attack.steps < 0) throw ConfigError("attack steps must be >= 0");
    if (cap < 1) throw ConfigError("cap must be >= 1");
    if (consistency.members < 5) throw ConfigError("consistency needs >= 5 members per space");
    if (!(consistency.denormalize_mean_per_receptor >= 0)) throw ConfigError("de-normalizer mean must be >= 0");
    if (!rule_set.has(rules::RuleKind::Empty)) throw ConfigError("rule set must contain the empty rule");
    const auto& rp = rule_set.pools();
    if (rp.identifiers != pools.identifiers || rp.words != pools.words || rp.snippets != pools.snippets) {
      throw ConfigError("rule pools must equal the template pools");
    }
    std::set<std::string> labels;
    for (const auto& s : schemes) {
      s.params.validate();
      if (!labels.insert(cell_label(s.params)).second) throw ConfigError("duplicate scheme cell " + cell_label(s.params));
    }
    (void)bundles();
  }
};

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::read(j, "catalog", c.catalog);
    detail::read(j, "tasks", c.tasks);
    if (c.catalog == "compact") c.pools = model::TemplatePools{4, 2, 2, 0.9, 0.5};
    if (j.contains("template_pools")) {
      const auto& p = j.at("template_pools");
      detail::read(p, "identifiers", c.pools.identifiers);
      detail::read(p, "words", c.pools.words);
      detail::read(p, "snippets", c.pools.snippets);
      detail::read(p, "comment_fill", c.pools.comment_fill);
      detail::read(p, "dead_fill", c.pools.dead_fill);
    }
    if (j.contains("schemes")) {
      for (const auto& s : j.at("schemes")) {
        auto sc = s.get<watermark::SchemeConfig>();
        if (!s.contains("epsilon_pos")) sc.epsilon_pos = j.value("epsilon_pos", sc.epsilon_pos);
        c.schemes.push_back(sc);
      }
    }
    nlohmann::json rj = j.value("rules", nlohmann::json{{"rules", {"empty", "rename_var", "add_comment", "del_comment",
                                                                   "add_dead", "del_dead"}}});
    if (!rj.contains("identifier_pool_size")) rj["identifier_pool_size"] = c.pools.identifiers;
    if (!rj.contains("comment_word_pool_size")) rj["comment_word_pool_size"] = c.pools.words;
    if (!rj.contains("snippet_pool_size")) rj["snippet_pool_size"] = c.pools.snippets;
    c.rule_set = rules::rule_set_from_json(rj);
    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      if (a.contains("steps")) {
        if (a.at("steps").is_string()) {
          if (a.at("steps").get<std::string>() != "auto") throw ConfigError("attack steps must be an integer or \"auto\"");
          c.attack.automatic = true;
        } else {
          c.attack.automatic = false;
          c.attack.steps = a.at("steps").get<std::int64_t>();
        }
      }
      detail::read(a, "epsilon", c.attack.epsilon);
    }
    detail::read(j, "trials", c.trials);
    detail::read(j, "epsilon_pos", c.epsilon_pos);
    detail::read(j, "master_seed", c.master_seed);
    detail::read(j, "cap", c.cap);
    if (j.contains("consistency")) {
      const auto& k = j.at("consistency");
      detail::read(k, "samples", c.consistency.samples);
      detail::read(k, "members", c.consistency.members);
      detail::read(k, "denormalize_mean_per_receptor", c.consistency.denormalize_mean_per_receptor);
      detail::read(k, "duplicates_on_small_space", c.consistency.duplicates_on_small_space);
    }
    if (j.contains("impossibility")) {
      const auto& k = j.at("impossibility");
      detail::read(k, "trials", c.impossibility.trials);
      detail::read(k, "null_trials", c.impossibility.null_trials);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json schemes = nlohmann::json::array();
  for (const auto& s : c.schemes) schemes.push_back(s);
  nlohmann::json attack = {{"epsilon", c.attack.epsilon}};
  if (c.attack.automatic) {
    attack["steps"] = "auto";
  } else {
    attack["steps"] = c.attack.steps;
  }
  return {{"catalog", c.catalog},
          {"tasks", c.tasks},
          {"template_pools",
           {{"identifiers", c.pools.identifiers},
            {"words", c.pools.words},
            {"snippets", c.pools.snippets},
            {"comment_fill", c.pools.comment_fill},
            {"dead_fill", c.pools.dead_fill}}},
          {"schemes", schemes},
          {"rules", rules::rule_set_to_json(c.rule_set)},
          {"attack", attack},
          {"trials", c.trials},
          {"epsilon_pos", c.epsilon_pos},
          {"master_seed", c.master_seed},
          {"cap", c.cap},
          {"consistency",
           {{"samples", c.consistency.samples},
            {"members", c.consistency.members},
            {"denormalize_mean_per_receptor", c.consistency.denormalize_mean_per_receptor},
            {"duplicates_on_small_space", c.consistency.duplicates_on_small_space}}},
          {"impossibility", {{"trials", c.impossibility.trials}, {"null_trials", c.impossibility.null_trials}}}};
}

}  // namespace wmlab::harness

// wmlab: watermark / attack / detection lab driver.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wmlab/harness/experiments.hpp"

using namespace wmlab;
using namespace wmlab::harness;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCap = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> cap;
  std::optional<double> epsilon;
  std::optional<double> epsilon_pos;
};

nlohmann::json default_config() {
  return {{"schemes",
           {{{"scheme", "greenred"}, {"gamma", 0.25}, {"delta", 4.0}},
            {{"scheme", "sweet"}, {"gamma", 0.25}, {"delta", 4.0}, {"tau", 0.6}},
            {{"scheme", "synthid"}, {"rounds", 30}}}}};
}

ExperimentConfig load(const Flags& f) {
  nlohmann::json j = default_config();
  if (!f.config.empty()) {
    try {
      j = nlohmann::json::parse(read_file(f.config));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.seed) j["master_seed"] = *f.seed;
  if (f.cap) j["cap"] = *f.cap;
  if (f.epsilon) j["attack"]["epsilon"] = *f.epsilon;
  if (f.epsilon_pos) {
    j["epsilon_pos"] = *f.epsilon_pos;
    if (j.contains("schemes")) {
      for (auto& s : j["schemes"]) s["epsilon_pos"] = *f.epsilon_pos;
    }
  }
  return config_from_json(j);
}

/// One unwatermarked program per task; the seed of every chain command.
std::vector<std::pair<std::string, lang::Program>> chain_seeds(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, lang::Program>> out;
  Rng rng(derive_seed(cfg.master_seed, kSpaceStream));
  for (const auto& b : cfg.bundles()) out.emplace_back(b.task.id, model::generate(b.tmpl, rng));
  return out;
}

void save_json(const ExperimentConfig& cfg, const fs::path& dir, const std::string& stem, const nlohmann::json& j) {
  auto p = seeded(dir, stem, cfg.master_seed, ".json");
  write_file(p, j.dump(2) + "\n");
  std::cout << "wrote " << p.string() << "\n";
}

void cmd_enumerate(const ExperimentConfig& cfg, const fs::path& out) {
  auto arr = nlohmann::json::array();
  for (const auto& [task, p] : chain_seeds(cfg)) {
    auto g = chain::enumerate_space(p, cfg.rule_set, cfg.cap);
    auto j = chain::graph_to_json(g);
    j["task"] = task;
    j["seed_program"] = p.text();
    arr.push_back(j);
    std::cout << task << ": " << g.size() << " states, " << g.edge_count() << " edges\n";
  }
  save_json(cfg, out, "enumerate", arr);
}

void cmd_mixing(const ExperimentConfig& cfg, const fs::path& out) {
  auto arr = nlohmann::json::array();
  for (const auto& [task, p] : chain_seeds(cfg)) {
    auto g = chain::enumerate_space(p, cfg.rule_set, cfg.cap);
    auto P = chain::transition_matrix(g);
    auto check = chain::check_irreducible_aperiodic(g);
    if (!check.ok()) throw chain::NotErgodic(task + ": " + check.violations.front());
    auto pi = chain::stationary(P);
    auto deg = chain::degree_stationary(g);
    double dev = 0;
    for (std::size_t i = 0; i < pi.size(); ++i) dev = std::max(dev, std::abs(pi[i] - deg[i]));
    const auto start = g.index.at(p.receptor_state());
    auto m = chain::mixing_time(P, start, pi, cfg.attack.epsilon);
    arr.push_back({{"task", task},
                   {"states", g.size()},
                   {"epsilon", cfg.attack.epsilon},
                   {"t_mix", m.t_mix},
                   {"tv_trace", m.tv_trace},
                   {"start_agreement_tv", check.start_agreement_tv},
                   {"period", check.period},
                   {"degree_formula_max_dev", dev}});
    std::cout << task << ": |V|=" << g.size() << " t_c(" << cfg.attack.epsilon << ")=" << m.t_mix << "\n";
  }
  save_json(cfg, out, "mixing", arr);
}

void cmd_congestion(const ExperimentConfig& cfg, const fs::path& out) {
  auto arr = nlohmann::json::array();
  for (const auto& [task, p] : chain_seeds(cfg)) {
    auto g = chain::enumerate_space(p, cfg.rule_set, cfg.cap);
    auto P = chain::transition_matrix(g);
    auto pi = chain::stationary(P);
    auto rep = chain::canonical_paths_and_congestion(g, pi, P);
    const auto start = g.index.at(p.receptor_state());
    auto t = chain::mixing_time(P, start, pi, cfg.attack.epsilon).t_mix;
    nlohmann::json j = {{"task", task}, {"states", g.size()}, {"applicable", rep.applicable}, {"t_mix", t}};
    if (rep.applicable) {
      j["rho"] = rep.rho;
      j["bound"] = rep.bound(cfg.attack.epsilon, start);
      j["max_path_length"] = rep.max_path_length;
      j["mean_path_length"] = rep.mean_path_length;
      j["receptors"] = rep.profile.receptors;
      j["alpha"] = rep.profile.alpha;
      j["beta"] = rep.profile.beta;
      std::cout << task << ": rho=" << rep.rho << " t_c=" << t << " bound=" << rep.bound(cfg.attack.epsilon, start)
                << "\n";
    }
    arr.push_back(j);
  }
  save_json(cfg, out, "congestion", arr);
}

int run(int argc, char** argv) {
  CLI::App app{"wmlab: code watermarking, random-walk attack and detection lab"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "experiment config JSON");
  app.add_option("--seed", f.seed, "master seed (overrides the config)");
  app.add_option("--out", f.out, "output directory")->capture_default_str();
  app.add_option("--cap", f.cap, "state cap for enumeration");
  app.add_option("--epsilon", f.epsilon, "mixing tolerance for t_c");
  app.add_option("--epsilon-pos", f.epsilon_pos, "target false positive rate");

  auto* gen = app.add_subcommand("generate", "watermarked and unwatermarked corpora");
  auto* att = app.add_subcommand("attack", "random-walk every corpus sample");
  auto* det = app.add_subcommand("detect", "score corpus and attacked corpus");
  auto* en = app.add_subcommand("enumerate", "enumerate each task's equivalent space");
  auto* mix = app.add_subcommand("mixing", "stationary law and t_c per task space");
  auto* con = app.add_subcommand("congestion", "canonical-path congestion and its bound");
  auto* cons = app.add_subcommand("consistency", "distribution consistency experiment");
  auto* imp = app.add_subcommand("impossibility", "calibrated detect rate after t_c steps");
  auto* rep = app.add_subcommand("report", "per-cell summary of detections");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto cfg = load(f);
    const fs::path out = f.out;
    if (gen->parsed()) {
      cmd_generate(cfg, out);
    } else if (att->parsed()) {
      cmd_attack(cfg, out);
    } else if (det->parsed()) {
      cmd_detect(cfg, out);
    } else if (en->parsed()) {
      cmd_enumerate(cfg, out);
    } else if (mix->parsed()) {
      cmd_mixing(cfg, out);
    } else if (con->parsed()) {
      cmd_congestion(cfg, out);
    } else if (cons->parsed()) {
      auto r = run_consistency(cfg);
      std::cout << "acceptance at 5%: " << r.acceptance_at(0.05) << " (" << r.evaluated << " spaces, " << r.excluded
                << " excluded)\n";
      save_json(cfg, out, "consistency", r.to_json());
    } else if (imp->parsed()) {
      auto r = run_impossibility(cfg);
      std::cout << "detect rate after attack: " << r.detect_after << " (target " << cfg.epsilon_pos << ")\n";
      save_json(cfg, out, "impossibility", r.to_json());
    } else if (rep->parsed()) {
      auto cells = cmd_report(cfg, out);
      for (const auto& c : cells) {
        std::cout << c.cell << ": auroc " << c.auroc_before << " -> " << c.auroc_after << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const chain::CapExceeded& e) {
    std::cerr << e.what() << "\n";
    return kExitCap;
  } catch (const chain::NotConverged& e) {
    std::cerr << e.what() << "\n";
    return kExitCap;
  } catch (const chain::NotErgodic& e) {
    std::cerr << e.what() << "\n";
    return kExitCap;
  } catch (const chain::TooLarge& e) {
    std::cerr << e.what() << "\n";
    return kExitCap;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "otasim/config.hpp"
#include "otasim/experiment.hpp"
#include "otasim/verify.hpp"
#include "otasim/version.hpp"

namespace otasim {

struct CliOptions {
  std::string config_path;  // empty = built-in defaults
  std::string out_dir = "results";
  std::string figure = "fix-dba";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> pnr_min, pnr_max, pnr_step;
  bool literal_search = false;
  std::size_t jobs = 0;  // 0 = all hardware threads
};

inline std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs != 0) return jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

// Config file (or defaults) with command-line overrides applied.
inline ScenarioConfig resolve_scenario(const CliOptions& o) {
  ScenarioConfig cfg =
      o.config_path.empty() ? default_scenario() : load_scenario_file(o.config_path);
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.trials) cfg.test_trials = *o.trials;
  if (o.pnr_min || o.pnr_max || o.pnr_step) {
    const double lo = o.pnr_min.value_or(cfg.pnr_grid_db.front());
    const double hi = o.pnr_max.value_or(cfg.pnr_grid_db.back());
    double step = 1.0;
    if (o.pnr_step) {
      step = *o.pnr_step;
    } else if (cfg.pnr_grid_db.size() > 1) {
      step = cfg.pnr_grid_db[1] - cfg.pnr_grid_db[0];
    }
    if (!(step > 0.0)) throw ConfigError("--pnr-step must be > 0");
    if (hi < lo) throw ConfigError("--pnr-max must be >= --pnr-min");
    cfg.pnr_grid_db.clear();
    for (std::size_t i = 0;; ++i) {
      const double p = lo + static_cast<double>(i) * step;
      if (p > hi + 1e-9) break;
      cfg.pnr_grid_db.push_back(p);
    }
  }
  if (o.literal_search) cfg.attack.literal_search = true;
  try {
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

inline Figure parse_figure(const std::string& name) {
  if (name == "fix-dba") return Figure::FixDba;
  if (name == "fix-dta") return Figure::FixDta;
  if (name == "methods") return Figure::Methods;
  if (name == "arch") return Figure::Arch;
  throw ConfigError("unknown figure '" + name +
                    "' (expected fix-dba, fix-dta, methods, or arch)");
}

namespace clidetail {

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string command_line(const std::string& name, const CliOptions& o) {
  std::string cmd = name;
  if (name == "curve") cmd += " --figure " + o.figure;
  if (o.literal_search) cmd += " --alg1-literal";
  return cmd;
}

}  // namespace clidetail

// Trains the (target, surrogate) pair and writes model files, metrics, and
// the reproduction manifest.
inline int cmd_train(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioConfig cfg = resolve_scenario(o);
    std::filesystem::create_directories(o.out_dir);
    const auto [model_t, model_a] = train_pair(cfg);
    save_model(model_t, o.out_dir + "/model_t.otnn");
    save_model(model_a, o.out_dir + "/model_a.otnn");
    const nlohmann::json metrics{
        {"target",
         {{"file", "model_t.otnn"},
          {"train_accuracy", model_t.meta.train_accuracy},
          {"val_accuracy", model_t.meta.val_accuracy},
          {"parameters", param_count(model_t)}}},
        {"surrogate",
         {{"file", "model_a.otnn"},
          {"train_accuracy", model_a.meta.train_accuracy},
          {"val_accuracy", model_a.meta.val_accuracy},
          {"parameters", param_count(model_a)}}}};
    clidetail::write_text(o.out_dir + "/metrics.json", metrics.dump(2) + "\n");
    clidetail::write_text(
        o.out_dir + "/manifest.json",
        manifest_json(cfg, o.config_path, clidetail::command_line("train", o), 1)
                .dump(2) +
            "\n");
    out << "target    val accuracy " << format_g6(model_t.meta.val_accuracy)
        << "  (" << param_count(model_t) << " parameters)\n";
    out << "surrogate val accuracy " << format_g6(model_a.meta.val_accuracy)
        << "  (" << param_count(model_a) << " parameters)\n";
    out << "wrote model_t.otnn, model_a.otnn, metrics.json, manifest.json to "
        << o.out_dir << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

// Reproduces one result figure: a CSV per scenario curve plus metrics and
// the manifest.
inline int cmd_curve(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioConfig cfg = resolve_scenario(o);
    const Figure fig = parse_figure(o.figure);
    const std::size_t jobs = resolve_jobs(o.jobs);
    std::filesystem::create_directories(o.out_dir);
    const std::vector<ResultTable> tables = reproduce(fig, cfg, jobs);
    std::size_t violations = 0;
    for (const ResultTable& t : tables) {
      clidetail::write_text(o.out_dir + "/" + csv_filename(t), csv_string(t));
      out << t.scenario << ": peak success " << format_g6(peak_success(t)) << " at "
          << format_g6(peak_pnr(t)) << " dB PNR -> " << csv_filename(t) << "\n";
      violations += t.meta.budget_violations;
    }
    clidetail::write_text(o.out_dir + "/metrics.json",
                          metrics_json(tables).dump(2) + "\n");
    clidetail::write_text(
        o.out_dir + "/manifest.json",
        manifest_json(cfg, o.config_path, clidetail::command_line("curve", o), jobs)
                .dump(2) +
            "\n");
    if (violations != 0) {
      err << "invariant failure: " << violations
          << " perturbations exceeded the power budget\n";
      return 3;
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

// Runs the library's invariant suites at small scale.
inline int cmd_verify(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const std::vector<verify::SuiteResult> results =
        verify::run_all(o.seed.value_or(1));
    return verify::print_report(results, out) ? 0 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace otasim

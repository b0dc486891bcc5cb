#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "otasim/experiment.hpp"
#include "otasim/version.hpp"

namespace otasim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace cfgdetail {

using njson = nlohmann::json;

inline std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

// Unknown keys are hard errors: a typo must never silently fall back to a
// default.
inline void check_keys(const njson& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config key '" + (path.empty() ? "<root>" : path) +
                      "': expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown config key '" + join(path, it.key().c_str()) + "'");
  }
}

inline double get_num(const njson& j, const std::string& path, const char* key,
                      double def) {
  if (!j.contains(key)) return def;
  const njson& v = j.at(key);
  if (!v.is_number())
    throw ConfigError("config key '" + join(path, key) + "': expected a number");
  return v.get<double>();
}

inline double require_num(const njson& j, const std::string& path, const char* key) {
  if (!j.contains(key))
    throw ConfigError("missing required config key '" + join(path, key) + "'");
  return get_num(j, path, key, 0.0);
}

inline std::size_t get_count(const njson& j, const std::string& path,
                             const char* key, std::size_t def) {
  if (!j.contains(key)) return def;
  const njson& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError("config key '" + join(path, key) +
                      "': expected a non-negative integer");
  return static_cast<std::size_t>(v.get<std::int64_t>());
}

inline std::uint64_t get_u64(const njson& j, const std::string& path,
                             const char* key, std::uint64_t def) {
  if (!j.contains(key)) return def;
  const njson& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config key '" + join(path, key) +
                    "': expected a non-negative integer");
}

inline bool get_bool(const njson& j, const std::string& path, const char* key,
                     bool def) {
  if (!j.contains(key)) return def;
  const njson& v = j.at(key);
  if (!v.is_boolean())
    throw ConfigError("config key '" + join(path, key) + "': expected a boolean");
  return v.get<bool>();
}

inline std::string get_str(const njson& j, const std::string& path, const char* key,
                           const std::string& def) {
  if (!j.contains(key)) return def;
  const njson& v = j.at(key);
  if (!v.is_string())
    throw ConfigError("config key '" + join(path, key) + "': expected a string");
  return v.get<std::string>();
}

inline ArchSpec parse_arch(const njson& j, const std::string& path,
                           const ArchSpec& def) {
  check_keys(j, path,
             {"input_len", "conv_filters", "conv_kernel_w", "hidden_layers",
              "dropout_rate"});
  ArchSpec a = def;
  a.input_len = get_count(j, path, "input_len", def.input_len);
  a.conv_filters = get_count(j, path, "conv_filters", def.conv_filters);
  a.conv_kernel_w = get_count(j, path, "conv_kernel_w", def.conv_kernel_w);
  a.dropout_rate = get_num(j, path, "dropout_rate", def.dropout_rate);
  if (j.contains("hidden_layers")) {
    const njson& h = j.at("hidden_layers");
    if (!h.is_array() || h.empty())
      throw ConfigError("config key '" + join(path, "hidden_layers") +
                        "': expected a nonempty array of integers");
    a.hidden_layers.clear();
    for (const njson& v : h) {
      if (!v.is_number_integer() || v.get<std::int64_t>() <= 0)
        throw ConfigError("config key '" + join(path, "hidden_layers") +
                          "': expected positive integers");
      a.hidden_layers.push_back(static_cast<std::size_t>(v.get<std::int64_t>()));
    }
  }
  return a;
}

inline std::vector<double> parse_pnr_grid(const njson& v, const std::string& path) {
  std::vector<double> grid;
  if (v.is_array()) {
    for (const njson& e : v) {
      if (!e.is_number())
        throw ConfigError("config key '" + path + "': expected numbers");
      grid.push_back(e.get<double>());
    }
  } else if (v.is_object()) {
    check_keys(v, path, {"min", "max", "step"});
    const double lo = get_num(v, path, "min", -10.0);
    const double hi = get_num(v, path, "max", 15.0);
    const double step = get_num(v, path, "step", 1.0);
    if (!(step > 0.0))
      throw ConfigError("config key '" + join(path, "step") + "': must be > 0");
    if (hi < lo)
      throw ConfigError("config key '" + path + "': max must be >= min");
    for (std::size_t i = 0;; ++i) {
      const double p = lo + static_cast<double>(i) * step;
      if (p > hi + 1e-9) break;
      grid.push_back(p);
      if (grid.size() > 100000)
        throw ConfigError("config key '" + path + "': grid too large");
    }
  } else {
    throw ConfigError("config key '" + path +
                      "': expected an array or a {min,max,step} object");
  }
  return grid;
}

}  // namespace cfgdetail

// Parses a scenario from its JSON form. Unknown keys and type mismatches are
// rejected with the offending dotted path; topology.d_ba and topology.d_ta
// are the only required keys, everything else falls back to the documented
// defaults. The derived quantities (per-node training seeds, the per-point
// power budget) are intentionally not addressable.
inline ScenarioConfig parse_scenario(const nlohmann::json& root) {
  using namespace cfgdetail;
  check_keys(root, "",
             {"master_seed", "noise_power", "train_frames", "test_trials",
              "topology", "fading", "arch_t", "arch_a", "train", "attack",
              "pnr_grid_db"});
  ScenarioConfig cfg = default_scenario();
  cfg.master_seed = get_u64(root, "", "master_seed", cfg.master_seed);
  cfg.noise_power = get_num(root, "", "noise_power", cfg.noise_power);
  cfg.train_frames = get_count(root, "", "train_frames", cfg.train_frames);
  cfg.test_trials = get_count(root, "", "test_trials", cfg.test_trials);

  if (!root.contains("topology"))
    throw ConfigError("missing required config key 'topology' "
                      "(topology.d_ba and topology.d_ta must be set)");
  const njson& topo = root.at("topology");
  check_keys(topo, "topology", {"d_bt", "d_ba", "d_ta"});
  cfg.topology.d_bt = get_num(topo, "topology", "d_bt", cfg.topology.d_bt);
  cfg.topology.d_ba = require_num(topo, "topology", "d_ba");
  cfg.topology.d_ta = require_num(topo, "topology", "d_ta");

  if (root.contains("fading")) {
    const njson& f = root.at("fading");
    check_keys(f, "fading", {"k_const", "d0", "gamma", "shadow_sigma_db"});
    cfg.fading.k_const = get_num(f, "fading", "k_const", cfg.fading.k_const);
    cfg.fading.d0 = get_num(f, "fading", "d0", cfg.fading.d0);
    cfg.fading.gamma = get_num(f, "fading", "gamma", cfg.fading.gamma);
    cfg.fading.shadow_sigma_db =
        get_num(f, "fading", "shadow_sigma_db", cfg.fading.shadow_sigma_db);
  }
  if (root.contains("arch_t"))
    cfg.arch_t = parse_arch(root.at("arch_t"), "arch_t", cfg.arch_t);
  if (root.contains("arch_a"))
    cfg.arch_a = parse_arch(root.at("arch_a"), "arch_a", cfg.arch_a);

  if (root.contains("train")) {
    const njson& t = root.at("train");
    check_keys(t, "train",
               {"epochs", "batch_size", "learning_rate", "adam_beta1",
                "adam_beta2", "adam_eps", "validation_fraction"});
    cfg.train_cfg.epochs = get_count(t, "train", "epochs", cfg.train_cfg.epochs);
    cfg.train_cfg.batch_size =
        get_count(t, "train", "batch_size", cfg.train_cfg.batch_size);
    cfg.train_cfg.learning_rate =
        get_num(t, "train", "learning_rate", cfg.train_cfg.learning_rate);
    cfg.train_cfg.adam_beta1 =
        get_num(t, "train", "adam_beta1", cfg.train_cfg.adam_beta1);
    cfg.train_cfg.adam_beta2 =
        get_num(t, "train", "adam_beta2", cfg.train_cfg.adam_beta2);
    cfg.train_cfg.adam_eps = get_num(t, "train", "adam_eps", cfg.train_cfg.adam_eps);
    cfg.train_cfg.validation_fraction = get_num(
        t, "train", "validation_fraction", cfg.train_cfg.validation_fraction);
  }

  if (root.contains("attack")) {
    const njson& a = root.at("attack");
    check_keys(a, "attack",
               {"power_rule", "input_source", "eps_acc", "literal_search"});
    const std::string rule = get_str(a, "attack", "power_rule", "max-budget");
    if (rule == "max-budget") {
      cfg.attack.power_rule = PowerRule::MaxBudget;
    } else if (rule == "surrogate-search") {
      cfg.attack.power_rule = PowerRule::SurrogateSearch;
    } else {
      throw ConfigError("config key 'attack.power_rule': expected "
                        "\"max-budget\" or \"surrogate-search\"");
    }
    const std::string src = get_str(a, "attack", "input_source", "transmitter");
    if (src == "transmitter") {
      cfg.attack.input_source = InputSource::TransmitterInput;
    } else if (src == "adversary") {
      cfg.attack.input_source = InputSource::AdversaryInput;
    } else {
      throw ConfigError("config key 'attack.input_source': expected "
                        "\"transmitter\" or \"adversary\"");
    }
    cfg.attack.eps_acc = get_num(a, "attack", "eps_acc", cfg.attack.eps_acc);
    cfg.attack.literal_search =
        get_bool(a, "attack", "literal_search", cfg.attack.literal_search);
  }

  if (root.contains("pnr_grid_db"))
    cfg.pnr_grid_db = cfgdetail::parse_pnr_grid(root.at("pnr_grid_db"), "pnr_grid_db");

  try {
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return parse_scenario(root);
}

// Resolved-scenario snapshot, the inverse of parse_scenario. Feeding it back
// through the parser reproduces the run exactly.
inline nlohmann::json scenario_json(const ScenarioConfig& cfg) {
  nlohmann::json arch_t{{"input_len", cfg.arch_t.input_len},
                        {"conv_filters", cfg.arch_t.conv_filters},
                        {"conv_kernel_w", cfg.arch_t.conv_kernel_w},
                        {"hidden_layers", cfg.arch_t.hidden_layers},
                        {"dropout_rate", cfg.arch_t.dropout_rate}};
  nlohmann::json arch_a{{"input_len", cfg.arch_a.input_len},
                        {"conv_filters", cfg.arch_a.conv_filters},
                        {"conv_kernel_w", cfg.arch_a.conv_kernel_w},
                        {"hidden_layers", cfg.arch_a.hidden_layers},
                        {"dropout_rate", cfg.arch_a.dropout_rate}};
  return nlohmann::json{
      {"master_seed", cfg.master_seed},
      {"noise_power", cfg.noise_power},
      {"train_frames", cfg.train_frames},
      {"test_trials", cfg.test_trials},
      {"topology",
       {{"d_bt", cfg.topology.d_bt},
        {"d_ba", cfg.topology.d_ba},
        {"d_ta", cfg.topology.d_ta}}},
      {"fading",
       {{"k_const", cfg.fading.k_const},
        {"d0", cfg.fading.d0},
        {"gamma", cfg.fading.gamma},
        {"shadow_sigma_db", cfg.fading.shadow_sigma_db}}},
      {"arch_t", arch_t},
      {"arch_a", arch_a},
      {"train",
       {{"epochs", cfg.train_cfg.epochs},
        {"batch_size", cfg.train_cfg.batch_size},
        {"learning_rate", cfg.train_cfg.learning_rate},
        {"adam_beta1", cfg.train_cfg.adam_beta1},
        {"adam_beta2", cfg.train_cfg.adam_beta2},
        {"adam_eps", cfg.train_cfg.adam_eps},
        {"validation_fraction", cfg.train_cfg.validation_fraction}}},
      {"attack",
       {{"power_rule", cfg.attack.power_rule == PowerRule::MaxBudget
                           ? "max-budget"
                           : "surrogate-search"},
        {"input_source", cfg.attack.input_source == InputSource::TransmitterInput
                             ? "transmitter"
                             : "adversary"},
        {"eps_acc", cfg.attack.eps_acc},
        {"literal_search", cfg.attack.literal_search}}},
      {"pnr_grid_db", cfg.pnr_grid_db}};
}

// --- result emission -------------------------------------------------------

inline std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_csv(const ResultTable& t, std::ostream& os) {
  os << "scenario,pnr_db,success_rate,stderr,n_trials\n";
  std::string label = t.scenario;
  for (char& c : label)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  for (const CurvePoint& p : t.points) {
    os << label << ',' << format_g6(p.pnr_db) << ',' << format_g6(p.success_rate)
       << ',' << format_g6(p.standard_error) << ',' << p.n_trials << '\n';
  }
}

inline std::string csv_string(const ResultTable& t) {
  std::ostringstream os;
  write_csv(t, os);
  return os.str();
}

inline std::string csv_filename(const ResultTable& t) {
  std::string name = t.scenario;
  for (char& c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_' ||
                    c == '=';
    if (!ok) c = '-';
  }
  return name + ".csv";
}

inline nlohmann::json metrics_json(const std::vector<ResultTable>& tables) {
  nlohmann::json out = nlohmann::json::array();
  for (const ResultTable& t : tables) {
    out.push_back({{"scenario", t.scenario},
                   {"target_val_accuracy", t.meta.target_val_accuracy},
                   {"surrogate_val_accuracy", t.meta.surrogate_val_accuracy},
                   {"budget_violations", t.meta.budget_violations},
                   {"total_trials", t.meta.total_trials},
                   {"peak_pnr_db", peak_pnr(t)},
                   {"peak_success_rate", peak_success(t)}});
  }
  return out;
}

// Everything needed to reproduce a result set bit-exactly: extract
// .resolved_config into a file and rerun with the recorded seed and command.
inline nlohmann::json manifest_json(const ScenarioConfig& cfg,
                                    const std::string& config_path,
                                    const std::string& command,
                                    std::size_t jobs) {
  char stamp[32] = "unknown";
  const std::time_t now = std::time(nullptr);
  if (std::tm tm{}; gmtime_r(&now, &tm) != nullptr)
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return nlohmann::json{{"tool", "otasim"},
                        {"version", kVersion},
                        {"command", command},
                        {"config_path", config_path.empty() ? "<defaults>" : config_path},
                        {"master_seed", cfg.master_seed},
                        {"jobs", jobs},
                        {"generated_utc", stamp},
                        {"resolved_config", scenario_json(cfg)}};
}

}  // namespace otasim

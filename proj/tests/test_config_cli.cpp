#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include "json.hpp"

#include "otasim/cli.hpp"
#include "otasim/config.hpp"
#include "otasim/experiment.hpp"
#include "otasim/verify.hpp"

using namespace otasim;
using nlohmann::json;

namespace {

json minimal_config() {
  return json{{"topology", {{"d_ba", 0.5}, {"d_ta", 0.5}}}};
}

json tiny_config() {
  json j = minimal_config();
  j["master_seed"] = 9;
  j["train_frames"] = 128;
  j["test_trials"] = 16;
  j["arch_t"] = {{"conv_filters", 4}, {"hidden_layers", {8}}};
  j["arch_a"] = {{"conv_filters", 4}, {"hidden_layers", {8}}};
  j["train"] = {{"epochs", 2}, {"batch_size", 32}};
  j["pnr_grid_db"] = {-5.0, 5.0};
  return j;
}

std::string expect_error(const json& cfg) {
  try {
    parse_scenario(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected ConfigError for " << cfg.dump();
  return "";
}

std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path p =
      std::filesystem::path(testing::TempDir()) / ("otasim_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string write_config(const std::filesystem::path& dir, const json& j) {
  const std::filesystem::path p = dir / "config.json";
  std::ofstream os(p);
  os << j.dump(2);
  return p.string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  EXPECT_TRUE(is.good()) << p;
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(config, minimal_file_gets_the_documented_defaults) {
  const ScenarioConfig cfg = parse_scenario(minimal_config());
  EXPECT_EQ(cfg.master_seed, 1u);
  EXPECT_EQ(cfg.test_trials, 2000u);
  EXPECT_EQ(cfg.train_frames, 10000u);
  EXPECT_DOUBLE_EQ(cfg.noise_power, 0.1);
  EXPECT_DOUBLE_EQ(cfg.topology.d_bt, 1.0);
  EXPECT_DOUBLE_EQ(cfg.topology.d_ba, 0.5);
  EXPECT_EQ(cfg.pnr_grid_db.size(), 26u);
  EXPECT_EQ(cfg.arch_t.conv_filters, 16u);
  EXPECT_EQ(cfg.arch_t.hidden_layers, std::vector<std::size_t>{64});
  EXPECT_DOUBLE_EQ(cfg.fading.gamma, 2.7);
  EXPECT_DOUBLE_EQ(cfg.fading.shadow_sigma_db, 8.0);
  EXPECT_EQ(cfg.train_cfg.epochs, 20u);
  EXPECT_EQ(cfg.train_cfg.batch_size, 64u);
  EXPECT_EQ(cfg.attack.power_rule, PowerRule::MaxBudget);
  EXPECT_EQ(cfg.attack.input_source, InputSource::TransmitterInput);
  EXPECT_FALSE(cfg.attack.literal_search);
}

TEST(config, missing_required_keys_are_named) {
  EXPECT_NE(expect_error(json::object()).find("topology"), std::string::npos);
  json j{{"topology", {{"d_ta", 0.5}}}};
  EXPECT_NE(expect_error(j).find("topology.d_ba"), std::string::npos);
  j = json{{"topology", {{"d_ba", 0.5}}}};
  EXPECT_NE(expect_error(j).find("topology.d_ta"), std::string::npos);
}

TEST(config, unknown_keys_are_rejected_with_their_path) {
  json j = minimal_config();
  j["topolgy"] = 1;
  EXPECT_NE(expect_error(j).find("'topolgy'"), std::string::npos);

  j = minimal_config();
  j["topology"]["d_x"] = 1.0;
  EXPECT_NE(expect_error(j).find("'topology.d_x'"), std::string::npos);

  j = minimal_config();
  j["attack"] = {{"epsacc", 0.1}};
  EXPECT_NE(expect_error(j).find("'attack.epsacc'"), std::string::npos);

  j = minimal_config();
  j["train"] = {{"seed", 5}};  // derived per node, deliberately unaddressable
  EXPECT_NE(expect_error(j).find("'train.seed'"), std::string::npos);
}

TEST(config, type_errors_are_rejected) {
  json j = minimal_config();
  j["train_frames"] = 1.5;
  EXPECT_NE(expect_error(j).find("train_frames"), std::string::npos);

  j = minimal_config();
  j["master_seed"] = -1;
  EXPECT_NE(expect_error(j).find("master_seed"), std::string::npos);

  j = minimal_config();
  j["noise_power"] = "loud";
  EXPECT_NE(expect_error(j).find("noise_power"), std::string::npos);

  j = minimal_config();
  j["arch_t"] = {{"hidden_layers", json::array()}};
  EXPECT_NE(expect_error(j).find("arch_t.hidden_layers"), std::string::npos);
}

TEST(config, pnr_grid_forms) {
  json j = minimal_config();
  j["pnr_grid_db"] = {-5.0, 0.0, 5.0};
  EXPECT_EQ(parse_scenario(j).pnr_grid_db, (std::vector<double>{-5.0, 0.0, 5.0}));

  j["pnr_grid_db"] = {{"min", -5.0}, {"max", 5.0}, {"step", 5.0}};
  EXPECT_EQ(parse_scenario(j).pnr_grid_db, (std::vector<double>{-5.0, 0.0, 5.0}));

  j["pnr_grid_db"] = {{"min", 0.0}, {"max", 1.0}, {"step", -1.0}};
  EXPECT_NE(expect_error(j).find("step"), std::string::npos);

  j["pnr_grid_db"] = {5.0, -5.0};
  EXPECT_NE(expect_error(j).find("invalid config"), std::string::npos);
}

TEST(config, attack_enums) {
  json j = minimal_config();
  j["attack"] = {{"power_rule", "surrogate-search"}, {"input_source", "adversary"}};
  const ScenarioConfig cfg = parse_scenario(j);
  EXPECT_EQ(cfg.attack.power_rule, PowerRule::SurrogateSearch);
  EXPECT_EQ(cfg.attack.input_source, InputSource::AdversaryInput);

  j["attack"] = {{"power_rule", "throttle"}};
  EXPECT_NE(expect_error(j).find("power_rule"), std::string::npos);
  j["attack"] = {{"input_source", "telepathy"}};
  EXPECT_NE(expect_error(j).find("input_source"), std::string::npos);
}

TEST(config, snapshot_roundtrips) {
  json j = tiny_config();
  j["attack"] = {{"power_rule", "surrogate-search"}, {"eps_acc", 2e-3}};
  j["fading"] = {{"gamma", 3.1}};
  const ScenarioConfig cfg = parse_scenario(j);
  const ScenarioConfig back = parse_scenario(scenario_json(cfg));
  EXPECT_EQ(back.master_seed, cfg.master_seed);
  EXPECT_EQ(back.pnr_grid_db, cfg.pnr_grid_db);
  EXPECT_EQ(back.arch_a.hidden_layers, cfg.arch_a.hidden_layers);
  EXPECT_EQ(back.attack.power_rule, cfg.attack.power_rule);
  EXPECT_DOUBLE_EQ(back.attack.eps_acc, cfg.attack.eps_acc);
  EXPECT_DOUBLE_EQ(back.fading.gamma, cfg.fading.gamma);
  EXPECT_DOUBLE_EQ(back.topology.d_ba, cfg.topology.d_ba);
}

TEST(csv, six_significant_digits_and_exact_header) {
  EXPECT_EQ(format_g6(0.123456789), "0.123457");
  EXPECT_EQ(format_g6(1.0), "1");
  EXPECT_EQ(format_g6(0.5), "0.5");
  EXPECT_EQ(format_g6(-10.0), "-10");

  ResultTable t;
  t.scenario = "demo";
  CurvePoint p;
  p.pnr_db = -10.0;
  p.success_rate = 0.123456789;
  p.standard_error = 0.021650635094610966;
  p.n_trials = 400;
  t.points.push_back(p);
  EXPECT_EQ(csv_string(t),
            "scenario,pnr_db,success_rate,stderr,n_trials\n"
            "demo,-10,0.123457,0.0216506,400\n");

  t.scenario = "a,b\nc";
  const std::string s = csv_string(t);
  EXPECT_NE(s.find("a;b;c,-10"), std::string::npos);
}

TEST(csv, filenames_are_sanitized) {
  ResultTable t;
  t.scenario = "d_ta=0.5";
  EXPECT_EQ(csv_filename(t), "d_ta=0.5.csv");
  t.scenario = "a b/c";
  EXPECT_EQ(csv_filename(t), "a-b-c.csv");
  t.scenario = "upper-bound";
  EXPECT_EQ(csv_filename(t), "upper-bound.csv");
}

TEST(manifest, records_the_resolved_run) {
  const ScenarioConfig cfg = parse_scenario(tiny_config());
  const json m = manifest_json(cfg, "", "curve --figure fix-dba", 4);
  EXPECT_EQ(m.at("tool"), "otasim");
  EXPECT_EQ(m.at("config_path"), "<defaults>");
  EXPECT_EQ(m.at("master_seed"), 9);
  EXPECT_EQ(m.at("jobs"), 4);
  EXPECT_TRUE(m.contains("resolved_config"));
  const ScenarioConfig back = parse_scenario(m.at("resolved_config"));
  EXPECT_EQ(back.master_seed, cfg.master_seed);
  EXPECT_EQ(back.test_trials, cfg.test_trials);
}

TEST(cli, figure_names) {
  EXPECT_EQ(parse_figure("fix-dba"), Figure::FixDba);
  EXPECT_EQ(parse_figure("fix-dta"), Figure::FixDta);
  EXPECT_EQ(parse_figure("methods"), Figure::Methods);
  EXPECT_EQ(parse_figure("arch"), Figure::Arch);
  EXPECT_THROW(parse_figure("pie"), ConfigError);
}

TEST(cli, overrides_rebuild_the_grid) {
  CliOptions o;
  o.seed = 42;
  o.trials = 10;
  o.pnr_min = -2.0;
  o.pnr_max = 2.0;
  o.pnr_step = 2.0;
  o.literal_search = true;
  const ScenarioConfig cfg = resolve_scenario(o);
  EXPECT_EQ(cfg.master_seed, 42u);
  EXPECT_EQ(cfg.test_trials, 10u);
  EXPECT_EQ(cfg.pnr_grid_db, (std::vector<double>{-2.0, 0.0, 2.0}));
  EXPECT_TRUE(cfg.attack.literal_search);

  CliOptions bad;
  bad.pnr_step = -1.0;
  EXPECT_THROW(resolve_scenario(bad), ConfigError);
  bad = CliOptions{};
  bad.pnr_min = 5.0;
  bad.pnr_max = -5.0;
  EXPECT_THROW(resolve_scenario(bad), ConfigError);
}

TEST(cli, override_step_defaults_to_the_existing_spacing) {
  const auto dir = fresh_dir("grid_step");
  json j = tiny_config();
  j["pnr_grid_db"] = {{"min", -10.0}, {"max", 10.0}, {"step", 5.0}};
  CliOptions o;
  o.config_path = write_config(dir, j);
  o.pnr_max = 15.0;
  const ScenarioConfig cfg = resolve_scenario(o);
  EXPECT_EQ(cfg.pnr_grid_db,
            (std::vector<double>{-10.0, -5.0, 0.0, 5.0, 10.0, 15.0}));
}

TEST(cli, train_reports_missing_keys_with_exit_2) {
  const auto dir = fresh_dir("train_bad");
  CliOptions o;
  o.config_path = write_config(dir, json{{"noise_power", 0.2}});
  o.out_dir = (dir / "out").string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(o, out, err), 2);
  EXPECT_NE(err.str().find("config error"), std::string::npos);
  EXPECT_NE(err.str().find("topology"), std::string::npos);

  o.config_path = (dir / "missing.json").string();
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_train(o, out2, err2), 2);
}

TEST(cli, train_writes_reproducible_models) {
  const auto dir = fresh_dir("train_ok");
  CliOptions o;
  o.config_path = write_config(dir, tiny_config());
  o.out_dir = (dir / "run1").string();
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(o, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("val accuracy"), std::string::npos);

  const Model t = load_model(o.out_dir + "/model_t.otnn");
  EXPECT_EQ(t.arch.conv_filters, 4u);
  const json metrics = json::parse(slurp(o.out_dir + "/metrics.json"));
  EXPECT_EQ(metrics.at("target").at("parameters"), param_count(t));
  const json manifest = json::parse(slurp(o.out_dir + "/manifest.json"));
  EXPECT_EQ(manifest.at("master_seed"), 9);

  CliOptions o2 = o;
  o2.out_dir = (dir / "run2").string();
  std::ostringstream out2, err2;
  ASSERT_EQ(cmd_train(o2, out2, err2), 0) << err2.str();
  EXPECT_EQ(slurp(o.out_dir + "/model_t.otnn"), slurp(o2.out_dir + "/model_t.otnn"));
  EXPECT_EQ(slurp(o.out_dir + "/model_a.otnn"), slurp(o2.out_dir + "/model_a.otnn"));
}

TEST(cli, curve_outputs_are_byte_stable) {
  const auto dir = fresh_dir("curve");
  CliOptions o;
  o.config_path = write_config(dir, tiny_config());
  o.figure = "methods";
  o.jobs = 1;
  o.out_dir = (dir / "run1").string();
  std::ostringstream out, err;
  ASSERT_EQ(cmd_curve(o, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("peak success"), std::string::npos);

  const std::string csv = slurp(o.out_dir + "/max-power.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "scenario,pnr_db,success_rate,stderr,n_trials");
  const json metrics = json::parse(slurp(o.out_dir + "/metrics.json"));
  ASSERT_EQ(metrics.size(), 3u);
  EXPECT_EQ(metrics[0].at("scenario"), "max-power");
  EXPECT_EQ(metrics[0].at("budget_violations"), 0);

  CliOptions o2 = o;
  o2.out_dir = (dir / "run2").string();
  std::ostringstream out2, err2;
  ASSERT_EQ(cmd_curve(o2, out2, err2), 0) << err2.str();

  CliOptions o3 = o;
  o3.jobs = 2;
  o3.out_dir = (dir / "run3").string();
  std::ostringstream out3, err3;
  ASSERT_EQ(cmd_curve(o3, out3, err3), 0) << err3.str();

  for (const char* name : {"max-power.csv", "surrogate-search.csv", "rba-search.csv"}) {
    const std::string a = slurp(std::filesystem::path(o.out_dir) / name);
    EXPECT_EQ(a, slurp(std::filesystem::path(o2.out_dir) / name)) << name;
    EXPECT_EQ(a, slurp(std::filesystem::path(o3.out_dir) / name)) << name;
  }
}

TEST(cli, curve_rejects_unknown_figures) {
  CliOptions o;
  o.figure = "pie";
  o.out_dir = (fresh_dir("curve_bad") / "out").string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_curve(o, out, err), 2);
  EXPECT_NE(err.str().find("figure"), std::string::npos);
}

TEST(cli, verify_reports_timed_suites) {
  CliOptions o;
  o.seed = 3;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify(o, out, err), 0) << out.str() << err.str();
  const std::string s = out.str();
  EXPECT_NE(s.find("[PASS]"), std::string::npos);
  EXPECT_EQ(s.find("[FAIL]"), std::string::npos);
  EXPECT_NE(s.find(" s)"), std::string::npos);  // per-suite timing
  for (const char* suite :
       {"gradient", "direction", "budget", "bisection", "determinism"}) {
    EXPECT_NE(s.find(suite), std::string::npos) << suite;
  }
}

TEST(cli, verify_suites_catch_a_seeded_defect) {
  // negative control: a deliberately corrupted gradient must be flagged
  const verify::SuiteResult bad = verify::gradient_suite(
      1, 5, [](const Model& m, const RealFrame& x, ClassLabel y) {
        RealFrame g = input_gradient(m, x, y).values;
        for (double& v : g.data) v *= 1.1;
        return g;
      });
  EXPECT_FALSE(bad.passed());
  const verify::SuiteResult good = verify::gradient_suite(1, 5, {});
  EXPECT_TRUE(good.passed());
}

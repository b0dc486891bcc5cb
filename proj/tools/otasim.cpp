#include <iostream>

#include "CLI11.hpp"
#include "otasim/cli.hpp"
#include "otasim/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"over-the-air adversarial attack simulator"};
  app.set_version_flag("--version", otasim::kVersion);
  app.require_subcommand(1);

  otasim::CliOptions opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "scenario config file (JSON)");
    cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", opt.seed, "override the master seed");
    cmd->add_option("--trials", opt.trials, "override trials per PNR point");
    cmd->add_option("--pnr-min", opt.pnr_min, "PNR grid start (dB)");
    cmd->add_option("--pnr-max", opt.pnr_max, "PNR grid end (dB)");
    cmd->add_option("--pnr-step", opt.pnr_step, "PNR grid step (dB)");
    cmd->add_flag("--alg1-literal", opt.literal_search,
                  "use the uncorrected literal power-search variant "
                  "(inverted attack gate and bisection branches)");
    cmd->add_option("--jobs", opt.jobs,
                    "worker threads, 0 = all hardware threads")
        ->capture_default_str();
  };

  CLI::App* train = app.add_subcommand(
      "train", "train the target and surrogate classifiers");
  add_common(train);

  CLI::App* curve =
      app.add_subcommand("curve", "reproduce one attack-success curve family");
  add_common(curve);
  curve->add_option("--figure", opt.figure,
                    "curve family: fix-dba, fix-dta, methods, arch")
      ->capture_default_str();

  CLI::App* verify =
      app.add_subcommand("verify", "run the library invariant suites");
  verify->add_option("--seed", opt.seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  if (train->parsed()) return otasim::cmd_train(opt, std::cout, std::cerr);
  if (curve->parsed()) return otasim::cmd_curve(opt, std::cout, std::cerr);
  return otasim::cmd_verify(opt, std::cout, std::cerr);
}

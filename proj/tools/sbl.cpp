// sbl: simulate scalar stochastic balance laws and verify the entropy-
// solution estimates pathwise.
//
//   sbl simulate <config>            run the config's simulation experiment
//   sbl verify <kind> <config>       kind: contraction | comparison |
//                                          commutator | kinetic | all
//
// Exit codes: 0 pass, 1 theorem assertion failed, 2 config/runtime error.
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sbl/runner.hpp"

namespace {

int execute(const std::string& config_path, sbl::CliOptions opt,
            const std::string& forced_kind) {
  sbl::ParseResult parsed = sbl::parse_config_file(config_path);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
    return 2;
  }
  sbl::RunConfig cfg = parsed.config;

  if (forced_kind == "contraction") cfg.experiment = sbl::ExperimentKind::contraction;
  else if (forced_kind == "comparison") cfg.experiment = sbl::ExperimentKind::comparison;
  else if (forced_kind == "commutator") cfg.experiment = sbl::ExperimentKind::commutator;
  else if (forced_kind == "kinetic") cfg.experiment = sbl::ExperimentKind::kinetic_check;
  else if (forced_kind == "all") cfg.experiment = sbl::ExperimentKind::all;
  else if (forced_kind == "simulate") {
    if (cfg.experiment != sbl::ExperimentKind::simulate &&
        cfg.experiment != sbl::ExperimentKind::porous_medium) {
      std::cerr << "config error: experiment '" << sbl::to_string(cfg.experiment)
                << "' is a verification; use `sbl verify`\n";
      return 2;
    }
  }

  const sbl::RunOutcome out = sbl::run_experiment(cfg, opt);
  for (const auto& a : out.assertions)
    std::cout << "assertion " << a.name << ": " << (a.pass ? "PASS" : "FAIL")
              << (a.detail.empty() ? "" : " (" + a.detail + ")") << "\n";
  std::cout << "outputs: " << out.out_dir.string() << "\n";
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solver and verifier for scalar stochastic balance laws"};
  app.require_subcommand(1);

  std::string config_path;
  std::string kind;
  sbl::CliOptions opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seeds", opt.seeds_override, "override seeds.count");
    cmd->add_option("--base-seed", opt.base_seed_override, "override seeds.base");
    cmd->add_option("--jobs", opt.jobs, "worker threads for the seed loop")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--dump-paths", opt.dump_paths, "write per-seed path CSVs");
    cmd->add_option("--out", opt.out_override, "override output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run a simulation experiment");
  sim->add_option("config", config_path, "run-configuration file")->required();
  add_common(sim);

  CLI::App* verify = app.add_subcommand("verify", "run a verification experiment");
  verify->add_option("kind", kind, "contraction|comparison|commutator|kinetic|all")
      ->required()
      ->check(CLI::IsMember({"contraction", "comparison", "commutator",
                             "kinetic", "all"}));
  verify->add_option("config", config_path, "run-configuration file")->required();
  add_common(verify);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return execute(config_path, opt, "simulate");
    return execute(config_path, opt, kind);
  } catch (const sbl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

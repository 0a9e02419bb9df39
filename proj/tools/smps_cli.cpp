// Command-line front end: run scenarios, compute ground states, list presets.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smps/smps.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kArgument = 3,
  kNumerical = 4,
  kIntegration = 5,
  kSize = 6,
  kIo = 7,
};

int report(const char* kind, const std::string& message, int code, const std::string& field = {}) {
  smps::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << "\n";
  return code;
}

smps::ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw smps::IoError("cannot open config " + path);
  smps::json j;
  try {
    j = smps::json::parse(is);
  } catch (const smps::json::parse_error& e) {
    throw smps::ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return smps::scenario_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic MPS trajectories of weakly measured Heisenberg chains"};
  app.set_version_flag("--version", std::string(smps::kCodeVersion));
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Run a scenario from a config file, run manifest or preset");
  std::string config_path, preset_name, out_dir, initial_state;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories, max_bond;
  std::optional<double> duration;
  std::vector<std::size_t> only;
  auto* cfg_opt = run_cmd->add_option("-c,--config", config_path, "Scenario JSON (or a run_manifest.json to replay)");
  auto* pre_opt = run_cmd->add_option("-p,--preset", preset_name, "Built-in scenario name");
  cfg_opt->excludes(pre_opt);
  run_cmd->add_option("--seed", seed, "Override ensemble.seed");
  run_cmd->add_option("-n,--trajectories", trajectories, "Override ensemble.trajectories");
  run_cmd->add_option("-o,--out-dir", out_dir, "Override output.directory");
  run_cmd->add_option("--max-bond", max_bond, "Override evolution.max_bond");
  run_cmd->add_option("--duration", duration, "Override duration");
  run_cmd->add_option("--initial-state", initial_state, "Start from this .smps snapshot");
  run_cmd->add_option("--only", only, "Run only these trajectory indices")->delimiter(',');

  // ground-state
  auto* gs_cmd = app.add_subcommand("ground-state", "DMRG ground state of the Heisenberg chain");
  std::size_t gs_length = 20, gs_bond = 64, gs_sweeps = 20;
  double gs_coupling = 1.0, gs_tol = 1e-10;
  std::uint64_t gs_seed = 20240601;
  std::string gs_out;
  gs_cmd->add_option("-L,--length", gs_length, "Number of sites")->capture_default_str();
  gs_cmd->add_option("-J,--coupling", gs_coupling, "Exchange coupling")->capture_default_str();
  gs_cmd->add_option("--max-bond", gs_bond, "Bond dimension cap")->capture_default_str();
  gs_cmd->add_option("--sweeps", gs_sweeps, "Sweep cap")->capture_default_str();
  gs_cmd->add_option("--tol", gs_tol, "Energy convergence tolerance")->capture_default_str();
  gs_cmd->add_option("--seed", gs_seed, "Seed of the starting product state")->capture_default_str();
  gs_cmd->add_option("--out", gs_out, "Write the state to this .smps file");

  // presets
  auto* pr_cmd = app.add_subcommand("presets", "List built-in scenarios or print one as JSON");
  std::string dump_name;
  pr_cmd->add_option("--dump", dump_name, "Print this preset's config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kArgument;
  }

  try {
    if (*run_cmd) {
      if (config_path.empty() && preset_name.empty()) throw smps::ConfigError("config", "pass --config or --preset");
      smps::ScenarioConfig c = config_path.empty() ? smps::preset(preset_name) : load_config(config_path);
      if (seed) c.seed = *seed;
      if (trajectories) c.trajectories = *trajectories;
      if (!out_dir.empty()) c.out_dir = out_dir;
      if (max_bond) c.max_bond = *max_bond;
      if (duration) c.duration = *duration;
      if (!initial_state.empty()) c.initial_state = initial_state;
      smps::RunOptions ropt;
      ropt.only = only;
      const smps::RunResult r = smps::run(c, ropt);
      std::size_t warned = 0;
      for (const auto& rec : r.records) warned += rec.warnings.empty() ? 0 : 1;
      smps::json out = {{"directory", c.out_dir},
                        {"trajectories", r.records.size()},
                        {"config_hash", r.manifest["config_hash"]},
                        {"trajectories_with_warnings", warned}};
      std::cout << out.dump() << "\n";
    } else if (*gs_cmd) {
      smps::DmrgOptions opt;
      opt.max_bond = gs_bond;
      opt.max_sweeps = gs_sweeps;
      opt.tol = gs_tol;
      opt.seed = gs_seed;
      if (gs_length < 2) throw smps::ArgumentError("ground-state: need at least two sites");
      const smps::GroundStateResult g = smps::dmrg(smps::heisenberg_mpo(gs_length, gs_coupling), opt);
      if (!gs_out.empty()) smps::save_snapshot(gs_out, g.state);
      smps::json out = {{"length", gs_length},         {"energy", g.energy},
                        {"variance", g.variance},      {"sweeps", g.sweeps_used},
                        {"converged", g.converged},    {"max_bond", g.state.max_bond_dim()},
                        {"max_discarded", g.max_discarded}};
      if (!gs_out.empty()) out["snapshot"] = gs_out;
      std::cout << out.dump(2) << "\n";
    } else if (*pr_cmd) {
      if (dump_name.empty()) {
        for (const auto& n : smps::preset_names()) std::cout << n << "\n";
      } else {
        std::cout << smps::to_json(smps::preset(dump_name)).dump(2) << "\n";
      }
    }
  } catch (const smps::ConfigError& e) {
    return report("config", e.what(), kConfig, e.field());
  } catch (const smps::DimensionError& e) {
    return report("dimension", e.what(), kArgument);
  } catch (const smps::ArgumentError& e) {
    return report("argument", e.what(), kArgument);
  } catch (const smps::NumericalError& e) {
    return report("numerical", e.what(), kNumerical);
  } catch (const smps::IntegrationError& e) {
    return report("integration", e.what(), kIntegration);
  } catch (const smps::SizeError& e) {
    return report("size", e.what(), kSize);
  } catch (const smps::IoError& e) {
    return report("io", e.what(), kIo);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kOther);
  }
  return kOk;
}

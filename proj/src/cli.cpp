#include "psqlab/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "psqlab/agents.hpp"
#include "psqlab/environments.hpp"
#include "psqlab/harness.hpp"
#include "psqlab/mdp.hpp"

namespace psqlab::cli {

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_sig(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

struct RunOptions {
  std::string config_path;
  std::optional<std::string> env;
  std::optional<std::string> agents;
  std::optional<long> episodes;
  std::optional<int> instances;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> regret_mode;
};

std::optional<int> threads_from_env() {
  const char* raw = std::getenv("PSQLAB_THREADS");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  if (*end != '\0' || value < 0 || value > 4096) {
    throw ConfigError(std::string("PSQLAB_THREADS must be a nonnegative integer, got '") + raw +
                      "'");
  }
  return static_cast<int>(value);
}

ExperimentConfig build_run_config(const RunOptions& opts) {
  KeyValues values;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw ConfigError("cannot open config file '" + opts.config_path + "'");
    values = parse_key_values(in);
  }
  auto merge = [&](const std::string& key, const std::optional<std::string>& flag) {
    if (!flag) return;
    const auto it = values.find(key);
    if (it != values.end() && it->second != *flag) {
      throw ConfigError("flag for '" + key + "' (" + *flag + ") conflicts with config file (" +
                        it->second + ")");
    }
    values[key] = *flag;
  };
  auto str = [](const auto& opt) -> std::optional<std::string> {
    if (!opt) return std::nullopt;
    if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) {
      return *opt;
    } else {
      return std::to_string(*opt);
    }
  };
  merge("env", opts.env);
  merge("agents", opts.agents);
  merge("episodes", str(opts.episodes));
  merge("instances", str(opts.instances));
  merge("seed", str(opts.seed));
  merge("out", opts.out);
  merge("regret_mode", opts.regret_mode);
  if (!values.contains("out")) values["out"] = "results";

  ExperimentConfig config = config_from_key_values(values);
  if (const auto threads = threads_from_env()) config.threads = *threads;
  return config;
}

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = build_run_config(opts);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const auto started = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment(config);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  for (const auto& agg : result.aggregate) {
    out << agg.agent << ": final mean cumulative regret " << format_sig(agg.mean.back(), 6)
        << " (std " << format_sig(agg.stddev.back(), 6) << ") over " << config.instances
        << " instances, " << config.episodes << " episodes\n";
  }
  out << "wrote " << config.output_dir << "/" << kRunsCsvName << " and " << config.output_dir
      << "/" << kAggregateCsvName << "\n";
  err << "elapsed " << format_sig(seconds, 4) << " s\n";
  return kExitOk;
}

int cmd_solve(const std::string& path, std::ostream& out, std::ostream& err) {
  std::ifstream in(path);
  if (!in) {
    err << "config error: cannot open '" << path << "'\n";
    return kExitConfig;
  }
  std::optional<EnvironmentInstance> instance;
  try {
    instance.emplace(read_instance(in));
  } catch (const ValidationError& e) {
    err << "config error: " << path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  const TabularMDP& mdp = instance->mdp;
  const ValueTables values = solve_optimal(mdp);
  const Policy policy = greedy_policy(values);
  out << "v_star(1, " << mdp.start_state() << ") = "
      << format_sig(values.v(1, mdp.start_state()), 10) << "\n";
  out << "optimal policy (rows h = 1.." << mdp.horizon() << ", columns s = 0.."
      << mdp.num_states() - 1 << ")\n";
  for (int h = 1; h <= mdp.horizon(); ++h) {
    out << "h=" << h << ":";
    for (int s = 0; s < mdp.num_states(); ++s) out << ' ' << policy(h, s);
    out << "\n";
  }
  return kExitOk;
}

int cmd_dump_env(const std::string& env, std::uint64_t seed, int instance, int horizon,
                 const std::string& path, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config.env = parse_env_family(env);
    config.master_seed = seed;
    config.chain.horizon = config.grid.horizon = horizon;
    if (instance < 0) throw ValidationError("instance must be nonnegative");
    config.chain.validate();
    config.grid.validate();
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const EnvironmentInstance generated = generate_instance(config, instance);
  if (path.empty() || path == "-") {
    write_instance(out, generated);
    return kExitOk;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    err << "cannot open '" << path << "' for writing\n";
    return kExitRuntime;
  }
  write_instance(file, generated);
  return file ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tabular episodic RL laboratory: posterior-sampling Q-learning and baselines"};
  app.require_subcommand(1, 1);

  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run a seeded multi-instance regret experiment");
  run_cmd->add_option("--config", run_opts.config_path, "Key/value experiment config file");
  run_cmd->add_option("--env", run_opts.env, "Environment family: chain or grid");
  run_cmd->add_option("--agents", run_opts.agents, "Comma-separated agent names");
  run_cmd->add_option("--episodes", run_opts.episodes, "Episodes per run (K)");
  run_cmd->add_option("--instances", run_opts.instances, "Random instances");
  run_cmd->add_option("--seed", run_opts.seed, "Master seed");
  run_cmd->add_option("--out", run_opts.out, "Output directory for the CSVs");
  run_cmd->add_option("--regret-mode", run_opts.regret_mode, "realized or exact");

  std::string env_file;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a serialized instance exactly");
  solve_cmd->add_option("--env-file", env_file, "Instance file from dump-env")->required();

  app.add_subcommand("list-agents", "Print the available agent names");

  std::string dump_env = "chain";
  std::uint64_t dump_seed = 0;
  int dump_instance = 0;
  int dump_horizon = 32;
  std::string dump_out;
  auto* dump_cmd = app.add_subcommand("dump-env", "Write a generated instance to a file");
  dump_cmd->add_option("--env", dump_env, "chain or grid");
  dump_cmd->add_option("--seed", dump_seed, "Master seed (same derivation as run)");
  dump_cmd->add_option("--instance", dump_instance, "Instance index");
  dump_cmd->add_option("--horizon", dump_horizon, "Episode length H");
  dump_cmd->add_option("--out", dump_out, "Output path (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_opts, out, err);
    if (solve_cmd->parsed()) return cmd_solve(env_file, out, err);
    if (dump_cmd->parsed()) {
      return cmd_dump_env(dump_env, dump_seed, dump_instance, dump_horizon, dump_out, out, err);
    }
    for (const auto& name : agent_names()) out << name << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace psqlab::cli

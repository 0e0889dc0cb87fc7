#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psqlab/agents.hpp"
#include "psqlab/environments.hpp"
#include "psqlab/mdp.hpp"

namespace psqlab {

enum class RegretMode {
  kRealized,  ///< v* minus the sum of rewards actually collected
  kExact,     ///< v* minus the exact value of the policy committed at episode start
};

std::string to_string(RegretMode mode);
RegretMode parse_regret_mode(const std::string& text);

struct AgentSpec {
  std::string name;
  AgentConfig config;
};

struct ExperimentConfig {
  EnvFamily env = EnvFamily::kChain;
  ChainRanges chain;
  GridRanges grid;
  std::vector<AgentSpec> agents;
  long episodes = 10000;
  int instances = 10;
  std::uint64_t master_seed = 0;
  RegretMode regret_mode = RegretMode::kRealized;
  std::string output_dir;  ///< empty: nothing is written
  int threads = 0;         ///< 0: hardware concurrency

  void validate() const;
};

struct RegretCurve {
  std::string agent;
  int instance = 0;
  std::uint64_t seed = 0;
  std::vector<double> episode_return;
  std::vector<double> cumulative_regret;
};

struct AggregateCurve {
  std::string agent;
  std::vector<double> mean;
  std::vector<double> stddev;  ///< sample standard deviation (n - 1)
};

struct ExperimentResult {
  std::vector<double> v_star;       ///< per instance, at the start state
  std::vector<RegretCurve> curves;  ///< sorted by (agent, instance)
  std::vector<AggregateCurve> aggregate;  ///< sorted by agent
};

/// Seeds. The instance generator uses derive_seed(master, i); a cell's agent
/// and environment-step streams derive from derive_seed(instance_seed, agent).
std::uint64_t instance_seed(std::uint64_t master, int instance);
std::uint64_t cell_seed(std::uint64_t master, int instance, const std::string& agent);

EnvironmentInstance generate_instance(const ExperimentConfig& config, int instance);

/// One episode; checks nothing about the agent beyond the interface contract.
EpisodeRecord run_episode(const TabularMDP& mdp, Agent& agent, RngStream& env_rng,
                          bool commit_policy = false);

/// Runs one agent for `episodes` episodes on one instance.
RegretCurve run_cell(const TabularMDP& mdp, const ValueTables& optimal, const AgentSpec& spec,
                     long episodes, RegretMode mode, std::uint64_t seed);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Per-episode mean and sample standard deviation. Throws on length mismatch.
AggregateCurve aggregate(std::span<const RegretCurve> curves);

/// Groups by agent name, one aggregate per agent in sorted order.
std::vector<AggregateCurve> aggregate_by_agent(std::span<const RegretCurve> curves);

/// `agent,instance,seed,episode,episode_return,cumulative_regret`
void write_runs_csv(std::ostream& out, std::span<const RegretCurve> curves);
/// `agent,episode,mean_cum_regret,std_cum_regret`
void write_aggregate_csv(std::ostream& out, std::span<const AggregateCurve> aggregates);

inline constexpr const char* kRunsCsvName = "runs.csv";
inline constexpr const char* kAggregateCsvName = "aggregate.csv";

/// Writes both CSVs into `dir`, creating it if needed.
void write_results(const std::string& dir, const ExperimentResult& result);

/// Flat `key = value` settings. `#` starts a comment line.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);

/// Builds a config from settings. Unknown keys raise ValidationError.
///
/// Experiment keys: env, agents (comma list), episodes, instances, seed, out,
/// regret_mode, threads, horizon, chain.p_min, chain.p_max, chain.length_min,
/// chain.length_max, grid.holes_min, grid.holes_max.
/// Agent keys, applied to every agent or, as `agent.<name>.<key>`, to one:
/// delta, variance, sigma_sq, c_tuned, c_ucb, c_rlsvi, c_bernstein,
/// bernstein_cap, j, init, clip, staged.ensemble, staged.kappa, staged.n0,
/// staged.r0.
ExperimentConfig config_from_key_values(const KeyValues& values);

}  // namespace psqlab

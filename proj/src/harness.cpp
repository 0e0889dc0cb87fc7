#include "psqlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace psqlab {

std::string to_string(RegretMode mode) {
  return mode == RegretMode::kRealized ? "realized" : "exact";
}

RegretMode parse_regret_mode(const std::string& text) {
  if (text == "realized") return RegretMode::kRealized;
  if (text == "exact") return RegretMode::kExact;
  throw ValidationError("unknown regret mode '" + text + "' (expected realized or exact)");
}

void ExperimentConfig::validate() const {
  if (episodes < 1) throw ValidationError("episodes must be at least 1");
  if (instances < 1) throw ValidationError("instances must be at least 1");
  if (threads < 0) throw ValidationError("threads must be nonnegative");
  if (agents.empty()) throw ValidationError("at least one agent is required");
  std::set<std::string> seen;
  for (const auto& spec : agents) {
    if (!is_agent_name(spec.name)) throw ValidationError("unknown agent '" + spec.name + "'");
    if (!seen.insert(spec.name).second) {
      throw ValidationError("agent '" + spec.name + "' listed twice");
    }
    spec.config.validate();
  }
  if (env == EnvFamily::kChain) {
    chain.validate();
  } else {
    grid.validate();
  }
}

std::uint64_t instance_seed(std::uint64_t master, int instance) {
  return derive_seed(master, static_cast<std::uint64_t>(instance));
}

std::uint64_t cell_seed(std::uint64_t master, int instance, const std::string& agent) {
  return derive_seed(instance_seed(master, instance), agent);
}

EnvironmentInstance generate_instance(const ExperimentConfig& config, int instance) {
  RngStream rng(derive_seed(instance_seed(config.master_seed, instance), "environment"));
  return config.env == EnvFamily::kChain ? make_chain(rng, config.chain)
                                         : make_grid(rng, config.grid);
}

EpisodeRecord run_episode(const TabularMDP& mdp, Agent& agent, RngStream& env_rng,
                          bool commit_policy) {
  EpisodeRecord record;
  record.trajectory.reserve(static_cast<std::size_t>(mdp.horizon()));
  agent.begin_episode(commit_policy);
  int s = mdp.start_state();
  for (int h = 1; h <= mdp.horizon(); ++h) {
    const int a = agent.select_action(h, s);
    const StepResult result = step(mdp, env_rng, h, s, a);
    const Transition t{h, s, a, result.reward, result.next_state};
    record.trajectory.push_back(t);
    record.realized_return += result.reward;
    agent.observe(t);
    s = result.next_state;
  }
  return record;
}

RegretCurve run_cell(const TabularMDP& mdp, const ValueTables& optimal, const AgentSpec& spec,
                     long episodes, RegretMode mode, std::uint64_t seed) {
  AgentContext context;
  context.horizon = mdp.horizon();
  context.num_states = mdp.num_states();
  context.num_actions = mdp.num_actions();
  context.episodes = episodes;
  context.v_max = kNormalizedVMax;

  AgentConfig config = spec.config;
  config.seed = derive_seed(seed, "agent");
  auto agent = make_agent(spec.name, config, context, &optimal);
  RngStream env_rng(derive_seed(seed, "steps"));

  const double v_star = optimal.v(1, mdp.start_state());
  const bool exact = mode == RegretMode::kExact;
  RegretCurve curve{spec.name, 0, seed, {}, {}};
  curve.episode_return.reserve(static_cast<std::size_t>(episodes));
  for (long k = 0; k < episodes; ++k) {
    const EpisodeRecord record = run_episode(mdp, *agent, env_rng, exact);
    double value = record.realized_return;
    if (exact) {
      value = evaluate_policy(mdp, agent->committed_policy())[static_cast<std::size_t>(
          mdp.start_state())];
    }
    curve.episode_return.push_back(value);
  }
  const long expected_calls = episodes * mdp.horizon();
  if (agent->select_calls() != expected_calls || agent->observe_calls() != expected_calls) {
    throw std::logic_error("agent '" + spec.name + "' broke the one select/observe per step rule");
  }
  curve.cumulative_regret = cumulative_regret(v_star, curve.episode_return);
  return curve;
}

AggregateCurve aggregate(std::span<const RegretCurve> curves) {
  if (curves.empty()) throw ValidationError("cannot aggregate zero curves");
  const std::size_t K = curves.front().cumulative_regret.size();
  for (const auto& c : curves) {
    if (c.cumulative_regret.size() != K) {
      throw ValidationError("cannot aggregate curves of different lengths");
    }
  }
  AggregateCurve out{curves.front().agent, std::vector<double>(K, 0.0),
                     std::vector<double>(K, 0.0)};
  const double n = static_cast<double>(curves.size());
  for (std::size_t k = 0; k < K; ++k) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c.cumulative_regret[k];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& c : curves) {
      const double d = c.cumulative_regret[k] - mean;
      ss += d * d;
    }
    out.mean[k] = mean;
    out.stddev[k] = curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return out;
}

std::vector<AggregateCurve> aggregate_by_agent(std::span<const RegretCurve> curves) {
  std::map<std::string, std::vector<RegretCurve>> groups;
  for (const auto& c : curves) groups[c.agent].push_back(c);
  std::vector<AggregateCurve> out;
  for (auto& [name, group] : groups) {
    // Sum order must not depend on the order the curves arrived in.
    std::sort(group.begin(), group.end(),
              [](const RegretCurve& a, const RegretCurve& b) { return a.instance < b.instance; });
    out.push_back(aggregate(group));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<EnvironmentInstance> instances;
  std::vector<ValueTables> optimal;
  ExperimentResult result;
  for (int i = 0; i < config.instances; ++i) {
    instances.push_back(generate_instance(config, i));
    optimal.push_back(solve_optimal(instances.back().mdp));
    result.v_star.push_back(optimal.back().v(1, instances.back().mdp.start_state()));
  }

  std::vector<AgentSpec> agents = config.agents;
  std::sort(agents.begin(), agents.end(),
            [](const AgentSpec& a, const AgentSpec& b) { return a.name < b.name; });

  const std::size_t cells = agents.size() * static_cast<std::size_t>(config.instances);
  result.curves.resize(cells);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (std::size_t cell = next++; cell < cells; cell = next++) {
      const auto& spec = agents[cell / static_cast<std::size_t>(config.instances)];
      const int instance = static_cast<int>(cell % static_cast<std::size_t>(config.instances));
      try {
        RegretCurve curve = run_cell(instances[static_cast<std::size_t>(instance)].mdp,
                                     optimal[static_cast<std::size_t>(instance)], spec,
                                     config.episodes, config.regret_mode,
                                     cell_seed(config.master_seed, instance, spec.name));
        curve.instance = instance;
        result.curves[cell] = std::move(curve);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  int threads = config.threads;
  if (threads == 0) threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), cells));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  result.aggregate = aggregate_by_agent(result.curves);
  if (!config.output_dir.empty()) write_results(config.output_dir, result);
  return result;
}

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_runs_csv(std::ostream& out, std::span<const RegretCurve> curves) {
  out << "agent,instance,seed,episode,episode_return,cumulative_regret\n";
  std::vector<const RegretCurve*> sorted;
  for (const auto& c : curves) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](const RegretCurve* a, const RegretCurve* b) {
    return std::tie(a->agent, a->instance) < std::tie(b->agent, b->instance);
  });
  for (const RegretCurve* c : sorted) {
    for (std::size_t k = 0; k < c->cumulative_regret.size(); ++k) {
      out << c->agent << ',' << c->instance << ',' << c->seed << ',' << (k + 1) << ','
          << format_double(c->episode_return[k]) << ','
          << format_double(c->cumulative_regret[k]) << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& out, std::span<const AggregateCurve> aggregates) {
  out << "agent,episode,mean_cum_regret,std_cum_regret\n";
  for (const auto& a : aggregates) {
    for (std::size_t k = 0; k < a.mean.size(); ++k) {
      out << a.agent << ',' << (k + 1) << ',' << format_double(a.mean[k]) << ','
          << format_double(a.stddev[k]) << '\n';
    }
  }
}

void write_results(const std::string& dir, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  auto write = [&](const char* name, auto&& body) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
  };
  write(kRunsCsvName, [&](std::ostream& out) { write_runs_csv(out, result.curves); });
  write(kAggregateCsvName, [&](std::ostream& out) { write_aggregate_csv(out, result.aggregate); });
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T to_number(const std::string& text, const std::string& key) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValidationError("invalid value '" + text + "' for key '" + key + "'");
  }
  return value;
}

bool to_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ValidationError("invalid boolean '" + text + "' for key '" + key + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::set<std::string>& agent_keys() {
  static const std::set<std::string> kKeys = {
      "delta",  "variance", "sigma_sq", "c_tuned",         "c_ucb",
      "c_rlsvi", "c_bernstein", "bernstein_cap", "j",      "init",
      "clip",   "staged.ensemble", "staged.kappa", "staged.n0", "staged.r0"};
  return kKeys;
}

const std::set<std::string>& experiment_keys() {
  static const std::set<std::string> kKeys = {
      "env",           "agents",         "episodes",       "instances",
      "seed",          "out",            "regret_mode",    "threads",
      "horizon",       "chain.p_min",    "chain.p_max",    "chain.length_min",
      "chain.length_max", "grid.holes_min", "grid.holes_max"};
  return kKeys;
}

void apply_agent_key(AgentConfig& config, const std::string& key, const std::string& value) {
  if (key == "delta") config.delta = to_number<double>(value, key);
  else if (key == "variance") config.variance_mode = parse_variance_mode(value);
  else if (key == "sigma_sq") config.sigma_sq = to_number<double>(value, key);
  else if (key == "c_tuned") config.c_tuned = to_number<double>(value, key);
  else if (key == "c_ucb") config.c_ucb = to_number<double>(value, key);
  else if (key == "c_rlsvi") config.c_rlsvi = to_number<double>(value, key);
  else if (key == "c_bernstein") config.c_bernstein = to_number<double>(value, key);
  else if (key == "bernstein_cap") config.bernstein_cap = parse_variance_mode(value);
  else if (key == "j") config.j_override = to_number<int>(value, key);
  else if (key == "init") config.init = parse_init_mode(value);
  else if (key == "clip") config.clip_estimates = to_bool(value, key);
  else if (key == "staged.ensemble") config.staged_ensemble = to_number<int>(value, key);
  else if (key == "staged.kappa") config.staged_kappa = to_number<double>(value, key);
  else if (key == "staged.n0") config.staged_n0 = to_number<double>(value, key);
  else if (key == "staged.r0") config.staged_r0 = to_number<double>(value, key);
  else throw ValidationError("unknown agent key '" + key + "'");
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    if (!values.emplace(key, trim(body.substr(eq + 1))).second) {
      throw ValidationError("config key '" + key + "' given twice");
    }
  }
  return values;
}

ExperimentConfig config_from_key_values(const KeyValues& values) {
  ExperimentConfig config;
  AgentConfig global_agent;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> per_agent;

  for (const auto& [key, value] : values) {
    if (key.rfind("agent.", 0) == 0) {
      const std::string rest = key.substr(6);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw ValidationError("malformed agent key '" + key + "'");
      const std::string name = rest.substr(0, dot);
      const std::string sub = rest.substr(dot + 1);
      if (!is_agent_name(name)) throw ValidationError("unknown agent '" + name + "' in '" + key + "'");
      if (!agent_keys().contains(sub)) throw ValidationError("unknown config key '" + key + "'");
      per_agent[name].emplace_back(sub, value);
    } else if (agent_keys().contains(key)) {
      apply_agent_key(global_agent, key, value);
    } else if (!experiment_keys().contains(key)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }

  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("env")) config.env = parse_env_family(*v);
  if (const auto* v = get("episodes")) config.episodes = to_number<long>(*v, "episodes");
  if (const auto* v = get("instances")) config.instances = to_number<int>(*v, "instances");
  if (const auto* v = get("seed")) config.master_seed = to_number<std::uint64_t>(*v, "seed");
  if (const auto* v = get("out")) config.output_dir = *v;
  if (const auto* v = get("regret_mode")) config.regret_mode = parse_regret_mode(*v);
  if (const auto* v = get("threads")) config.threads = to_number<int>(*v, "threads");
  if (const auto* v = get("horizon")) {
    config.chain.horizon = config.grid.horizon = to_number<int>(*v, "horizon");
  }
  if (const auto* v = get("chain.p_min")) config.chain.p_min = to_number<double>(*v, "chain.p_min");
  if (const auto* v = get("chain.p_max")) config.chain.p_max = to_number<double>(*v, "chain.p_max");
  if (const auto* v = get("chain.length_min")) {
    config.chain.length_min = to_number<int>(*v, "chain.length_min");
  }
  if (const auto* v = get("chain.length_max")) {
    config.chain.length_max = to_number<int>(*v, "chain.length_max");
  }
  if (const auto* v = get("grid.holes_min")) {
    config.grid.holes_min = to_number<int>(*v, "grid.holes_min");
  }
  if (const auto* v = get("grid.holes_max")) {
    config.grid.holes_max = to_number<int>(*v, "grid.holes_max");
  }

  const std::string* agent_list = get("agents");
  if (agent_list == nullptr) throw ValidationError("config key 'agents' is required");
  for (const auto& name : split_list(*agent_list)) {
    if (!is_agent_name(name)) throw ValidationError("unknown agent '" + name + "'");
    AgentSpec spec{name, global_agent};
    for (const auto& [key, value] : per_agent[name]) apply_agent_key(spec.config, key, value);
    config.agents.push_back(std::move(spec));
    per_agent.erase(name);
  }
  if (!per_agent.empty()) {
    throw ValidationError("settings given for agent '" + per_agent.begin()->first +
                          "' which is not in 'agents'");
  }
  config.validate();
  return config;
}

}  // namespace psqlab

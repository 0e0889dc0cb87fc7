#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psqlab/mdp.hpp"
#include "psqlab/posterior.hpp"
#include "psqlab/rng.hpp"

namespace psqlab {

/// What an agent may know about its environment before interacting.
struct AgentContext {
  int horizon = 32;
  int num_states = 1;
  int num_actions = 1;
  long episodes = 1;  ///< planned K; T = K * H enters the log terms
  double v_max = 1.0;

  long total_steps() const { return episodes * horizon; }
};

/// Initial value of every estimate at step h.
enum class InitMode {
  kVMax,       ///< v_max
  kHorizon,    ///< H
  kRemaining,  ///< r0 * (H - h) / H
};

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct AgentConfig {
  VarianceMode variance_mode = VarianceMode::kTuned;
  double sigma_sq = 0.0;  ///< Hoeffding sigma^2 override; <= 0 means 64 H^3
  double c_tuned = 0.02;
  double c_ucb = 0.01;
  double c_rlsvi = 0.005;
  double c_bernstein = 1.0;
  VarianceMode bernstein_cap = VarianceMode::kTuned;
  std::optional<int> j_override;
  std::optional<InitMode> init;  ///< unset: per-algorithm default
  bool clip_estimates = true;
  double delta = 0.05;
  std::uint64_t seed = 0;

  int staged_ensemble = 10;
  double staged_kappa = 1.0;
  double staged_n0 = -1.0;  ///< <= 0 means 1 / S
  double staged_r0 = 1.0;

  void validate() const;

  /// Algorithm 1 as analysed: estimates start at H, nothing is clipped and the
  /// posterior uses the Hoeffding schedule.
  static AgentConfig theoretical();
};

/// Common episodic interface. Non-virtual entry points count calls so the
/// harness can check one select/observe pair per step.
class Agent {
 public:
  Agent(const AgentContext& context, std::uint64_t seed);
  virtual ~Agent() = default;

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  virtual std::string_view name() const = 0;

  /// With `commit_policy`, the whole episode policy is drawn up front and
  /// `select_action` replays it; `committed_policy` then exposes it.
  void begin_episode(bool commit_policy = false);
  int select_action(int h, int s);
  void observe(const Transition& t);

  const Policy& committed_policy() const { return committed_; }
  bool has_committed_policy() const { return commit_; }
  long select_calls() const { return select_calls_; }
  long observe_calls() const { return observe_calls_; }
  const AgentContext& context() const { return context_; }

 protected:
  virtual void on_begin_episode() {}
  virtual int choose(int h, int s) = 0;
  virtual void update(const Transition& t) = 0;

  RngStream& rng() { return rng_; }

  std::size_t sa_index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h - 1) * context_.num_states + s) * context_.num_actions + a;
  }
  std::size_t sa_count() const {
    return static_cast<std::size_t>(context_.horizon) * context_.num_states * context_.num_actions;
  }

 private:
  AgentContext context_;
  RngStream rng_;
  bool commit_ = false;
  Policy committed_;
  long select_calls_ = 0;
  long observe_calls_ = 0;
};

/// Lowest-index argmax.
int argmax(std::span<const double> values);

/// Draws one N(means[a], sds[a]^2) sample per action in index order and
/// returns the lowest-index argmax.
int sample_argmax(std::span<const double> means, std::span<const double> sds, RngStream& rng);

/// max_j of J draws from N(means[a_hat], sds[a_hat]^2), a_hat = argmax means.
double optimistic_next_value(std::span<const double> means, std::span<const double> sds, int J,
                             RngStream& rng);

/// max_a of one fresh draw per action.
double vanilla_next_value(std::span<const double> means, std::span<const double> sds,
                          RngStream& rng);

/// Posterior state of a PSQL-family agent, laid out [h-1][s][a].
struct PosteriorTable {
  std::vector<double> mean;
  std::vector<long> count;
  std::vector<BernsteinAccumulators> bernstein;  ///< empty unless Bernstein mode
};

enum class TargetRule {
  kOptimistic,  ///< max of J samples at the posterior-mean argmax
  kVanilla,     ///< max over actions of one fresh sample each
};

/// PSQL, PSQL* and PSQL-Bernstein share this implementation.
class PosteriorSamplingAgent final : public Agent {
 public:
  PosteriorSamplingAgent(std::string name, TargetRule rule, const AgentConfig& config,
                         const AgentContext& context);

  std::string_view name() const override { return name_; }

  const PosteriorTable& table() const { return table_; }
  const VarianceParams& variance_params() const { return params_; }
  int samples_per_target() const { return J_; }

  /// Current posterior variance of (h, s, a).
  double posterior_variance(int h, int s, int a) const;

 protected:
  int choose(int h, int s) override;
  void update(const Transition& t) override;

 private:
  void fill_row(int h, int s, std::vector<double>& means, std::vector<double>& sds) const;

  std::string name_;
  TargetRule rule_;
  VarianceParams params_;
  int J_ = 1;
  bool clip_;
  PosteriorTable table_;
  std::vector<double> means_scratch_;
  std::vector<double> sds_scratch_;
};

/// sqrt(c * v_max^2 * log_term / n).
double ucb_bonus(double c, double v_max, long n, double log_term);

/// Optimistic Q-learning with a Hoeffding-style count bonus.
class UcbqlAgent final : public Agent {
 public:
  UcbqlAgent(const AgentConfig& config, const AgentContext& context);

  std::string_view name() const override { return "ucbql"; }
  double q(int h, int s, int a) const { return q_[sa_index(h, s, a)]; }
  long count(int h, int s, int a) const { return n_[sa_index(h, s, a)]; }
  double log_term() const { return log_term_; }

 protected:
  int choose(int h, int s) override;
  void update(const Transition& t) override;

 private:
  double c_;
  double log_term_;
  double value_cap_;
  bool clip_;
  std::vector<double> q_;
  std::vector<long> n_;
};

/// sqrt(c * v_max^2 * log_term / (n + 1)).
double rlsvi_noise_stddev(double c, double v_max, long n, double log_term);

/// Tabular RLSVI: empirical model plus Gaussian reward perturbation, solved by
/// backward induction once per episode.
class RlsviAgent final : public Agent {
 public:
  RlsviAgent(const AgentConfig& config, const AgentContext& context);

  std::string_view name() const override { return "rlsvi"; }

  /// Empirical next-state distribution for (h, s, a); all zeros if unvisited.
  std::vector<double> empirical_transition(int h, int s, int a) const;
  long count(int h, int s, int a) const { return n_[sa_index(h, s, a)]; }
  double perturbed_q(int h, int s, int a) const { return q_[sa_index(h, s, a)]; }
  double log_term() const { return log_term_; }

 protected:
  void on_begin_episode() override;
  int choose(int h, int s) override;
  void update(const Transition& t) override;

 private:
  struct Successor {
    int state;
    long count;
  };
  double c_;
  double log_term_;
  double init_value_;
  bool clip_;
  std::vector<long> n_;
  std::vector<double> reward_sum_;
  std::vector<std::vector<Successor>> successors_;
  std::vector<double> q_;
  std::vector<double> v_;
};

/// Stage length floor((1 + 1/H)^q * H) of stage q.
long staged_randql_stage_length(int stage, int horizon);

/// Staged randomized Q-learning: an ensemble of estimates updated with
/// Beta-distributed learning rates, committed to the policy only at the end
/// of each stage of geometrically growing length.
class StagedRandQlAgent final : public Agent {
 public:
  StagedRandQlAgent(const AgentConfig& config, const AgentContext& context);

  std::string_view name() const override { return "staged-randql"; }
  double q(int h, int s, int a) const { return q_bar_[sa_index(h, s, a)]; }
  int stage(int h, int s, int a) const { return stage_[sa_index(h, s, a)]; }

 protected:
  int choose(int h, int s) override;
  void update(const Transition& t) override;

 private:
  double init_value(int h) const;

  int ensemble_;
  double kappa_;
  double n0_;
  double r0_;
  InitMode init_;
  bool clip_;
  std::vector<double> q_bar_;
  std::vector<double> q_tilde_;  ///< [sa][j]
  std::vector<long> stage_count_;
  std::vector<int> stage_;
};

class RandomAgent final : public Agent {
 public:
  RandomAgent(const AgentContext& context, std::uint64_t seed) : Agent(context, seed) {}
  std::string_view name() const override { return "random"; }

 protected:
  int choose(int h, int s) override;
  void update(const Transition&) override {}
};

/// Acts greedily on the true optimal Q-values.
class OracleAgent final : public Agent {
 public:
  OracleAgent(const ValueTables& optimal, const AgentContext& context, std::uint64_t seed);
  std::string_view name() const override { return "oracle"; }

 protected:
  int choose(int h, int s) override { return policy_(h, s); }
  void update(const Transition&) override {}

 private:
  Policy policy_;
};

/// "psql", "psql-star", "psql-bernstein", "ucbql", "rlsvi", "staged-randql",
/// "random", "oracle".
const std::vector<std::string>& agent_names();
bool is_agent_name(std::string_view name);

/// `optimal` is required only for "oracle".
std::unique_ptr<Agent> make_agent(std::string_view name, const AgentConfig& config,
                                  const AgentContext& context,
                                  const ValueTables* optimal = nullptr);

}  // namespace psqlab

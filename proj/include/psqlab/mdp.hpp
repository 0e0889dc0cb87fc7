#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psqlab/rng.hpp"

namespace psqlab {

/// Raised for any malformed model, index or configuration value.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite-horizon, time-inhomogeneous tabular MDP with deterministic rewards.
///
/// Steps are 1-based (h = 1..H), states and actions 0-based. Construction
/// validates every transition row and reward; the object is immutable after.
class TabularMDP {
 public:
  /// `transitions` is laid out as [h-1][s][a][s'], `rewards` as [h-1][s][a].
  TabularMDP(int horizon, int num_states, int num_actions, int start_state,
             std::vector<double> transitions, std::vector<double> rewards);

  int horizon() const noexcept { return horizon_; }
  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }
  int start_state() const noexcept { return start_state_; }

  double reward(int h, int s, int a) const { return rewards_[sa_index(h, s, a)]; }

  double probability(int h, int s, int a, int next) const {
    return transitions_[sa_index(h, s, a) * num_states_ + static_cast<std::size_t>(next)];
  }

  std::span<const double> row(int h, int s, int a) const {
    return {transitions_.data() + sa_index(h, s, a) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }

  /// Next states with nonzero probability for (h, s, a), in increasing order.
  std::span<const int> support(int h, int s, int a) const;

  /// Samples a successor of (h, s, a).
  int sample_next(int h, int s, int a, RngStream& rng) const;

  const std::vector<double>& transitions() const noexcept { return transitions_; }
  const std::vector<double>& rewards() const noexcept { return rewards_; }

  void check_indices(int h, int s, int a) const;

 private:
  std::size_t sa_index(int h, int s, int a) const noexcept {
    return (static_cast<std::size_t>(h - 1) * num_states_ + static_cast<std::size_t>(s)) *
               num_actions_ +
           static_cast<std::size_t>(a);
  }

  int horizon_;
  int num_states_;
  int num_actions_;
  int start_state_;
  std::vector<double> transitions_;
  std::vector<double> rewards_;
  // CSR view of the nonzero transition entries.
  std::vector<std::size_t> support_offsets_;
  std::vector<int> support_states_;
  std::vector<double> support_cumulative_;
};

/// Dense (h, s, a) / (h, s) tables, h in 1..H+1 for values.
class ValueTables {
 public:
  ValueTables(int horizon, int num_states, int num_actions);

  double q(int h, int s, int a) const { return q_[qi(h, s, a)]; }
  double& q(int h, int s, int a) { return q_[qi(h, s, a)]; }
  /// v(H+1, s) is always 0.
  double v(int h, int s) const { return v_[vi(h, s)]; }
  double& v(int h, int s) { return v_[vi(h, s)]; }

  int horizon() const noexcept { return horizon_; }
  int num_states() const noexcept { return num_states_; }
  int num_actions() const noexcept { return num_actions_; }

 private:
  std::size_t qi(int h, int s, int a) const noexcept {
    return (static_cast<std::size_t>(h - 1) * num_states_ + s) * num_actions_ + a;
  }
  std::size_t vi(int h, int s) const noexcept {
    return static_cast<std::size_t>(h - 1) * num_states_ + s;
  }

  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<double> q_;
  std::vector<double> v_;
};

/// Deterministic Markov policy: action per (h, s), h in 1..H.
class Policy {
 public:
  Policy() = default;
  Policy(int horizon, int num_states, int fill = 0)
      : horizon_(horizon), num_states_(num_states),
        actions_(static_cast<std::size_t>(horizon) * num_states, fill) {}

  int operator()(int h, int s) const { return actions_[index(h, s)]; }
  int& operator()(int h, int s) { return actions_[index(h, s)]; }

  int horizon() const noexcept { return horizon_; }
  int num_states() const noexcept { return num_states_; }

 private:
  std::size_t index(int h, int s) const noexcept {
    return static_cast<std::size_t>(h - 1) * num_states_ + s;
  }
  int horizon_ = 0;
  int num_states_ = 0;
  std::vector<int> actions_;
};

struct Transition {
  int h;
  int state;
  int action;
  double reward;
  int next_state;
};

struct EpisodeRecord {
  std::vector<Transition> trajectory;
  double realized_return = 0.0;
};

struct StepResult {
  double reward;
  int next_state;
};

/// Backward induction. Ties in the greedy action are not resolved here; see
/// `greedy_policy`.
ValueTables solve_optimal(const TabularMDP& mdp);

/// Lowest-index argmax of q(h, s, .) for every (h, s).
Policy greedy_policy(const ValueTables& values);

/// V^pi(h, s) for h in 1..H+1, laid out [h-1][s].
std::vector<double> evaluate_policy(const TabularMDP& mdp, const Policy& policy);

StepResult step(const TabularMDP& mdp, RngStream& rng, int h, int s, int a);

/// Element k is sum_{j<=k} (v_star_at_start - returns[j]).
std::vector<double> cumulative_regret(double v_star_at_start, std::span<const double> returns);

}  // namespace psqlab

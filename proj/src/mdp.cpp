#include "psqlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace psqlab {

namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string where(int h, int s, int a) {
  std::ostringstream os;
  os << "(h=" << h << ", s=" << s << ", a=" << a << ")";
  return os.str();
}

}  // namespace

TabularMDP::TabularMDP(int horizon, int num_states, int num_actions, int start_state,
                       std::vector<double> transitions, std::vector<double> rewards)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      start_state_(start_state),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)) {
  if (horizon_ < 1 || num_states_ < 1 || num_actions_ < 1) {
    throw ValidationError("horizon, num_states and num_actions must be positive");
  }
  if (start_state_ < 0 || start_state_ >= num_states_) {
    throw ValidationError("start_state out of range");
  }
  const std::size_t rows =
      static_cast<std::size_t>(horizon_) * num_states_ * static_cast<std::size_t>(num_actions_);
  if (rewards_.size() != rows) throw ValidationError("reward tensor has wrong size");
  if (transitions_.size() != rows * num_states_) {
    throw ValidationError("transition tensor has wrong size");
  }

  support_offsets_.reserve(rows + 1);
  support_offsets_.push_back(0);
  for (int h = 1; h <= horizon_; ++h) {
    for (int s = 0; s < num_states_; ++s) {
      for (int a = 0; a < num_actions_; ++a) {
        const double r = reward(h, s, a);
        if (!(r >= 0.0 && r <= 1.0)) {
          throw ValidationError("reward outside [0, 1] at " + where(h, s, a));
        }
        double total = 0.0;
        for (int next = 0; next < num_states_; ++next) {
          const double p = probability(h, s, a, next);
          if (!(p >= 0.0) || !std::isfinite(p)) {
            throw ValidationError("negative or non-finite transition probability at " +
                                  where(h, s, a));
          }
          if (p > 0.0) {
            total += p;
            support_states_.push_back(next);
            support_cumulative_.push_back(total);
          }
        }
        if (std::abs(total - 1.0) > kRowSumTolerance) {
          throw ValidationError("transition row does not sum to 1 at " + where(h, s, a));
        }
        support_offsets_.push_back(support_states_.size());
      }
    }
  }
}

void TabularMDP::check_indices(int h, int s, int a) const {
  if (h < 1 || h > horizon_ || s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) {
    throw ValidationError("index out of range " + where(h, s, a));
  }
}

std::span<const int> TabularMDP::support(int h, int s, int a) const {
  const std::size_t row_id = sa_index(h, s, a);
  const std::size_t begin = support_offsets_[row_id];
  return {support_states_.data() + begin, support_offsets_[row_id + 1] - begin};
}

int TabularMDP::sample_next(int h, int s, int a, RngStream& rng) const {
  const std::size_t row_id = sa_index(h, s, a);
  const std::size_t begin = support_offsets_[row_id];
  const std::size_t end = support_offsets_[row_id + 1];
  if (end - begin == 1) return support_states_[begin];
  // Scale by the row total so the last entry is always reachable.
  const double u = rng.uniform() * support_cumulative_[end - 1];
  for (std::size_t i = begin; i + 1 < end; ++i) {
    if (u < support_cumulative_[i]) return support_states_[i];
  }
  return support_states_[end - 1];
}

ValueTables::ValueTables(int horizon, int num_states, int num_actions)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      q_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0),
      v_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0) {}

ValueTables solve_optimal(const TabularMDP& mdp) {
  const int H = mdp.horizon();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  ValueTables out(H, S, A);
  for (int h = H; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = mdp.reward(h, s, a);
        const auto row = mdp.row(h, s, a);
        for (const int next : mdp.support(h, s, a)) q += row[next] * out.v(h + 1, next);
        out.q(h, s, a) = q;
        best = std::max(best, q);
      }
      out.v(h, s) = best;
    }
  }
  return out;
}

Policy greedy_policy(const ValueTables& values) {
  Policy policy(values.horizon(), values.num_states());
  for (int h = 1; h <= values.horizon(); ++h) {
    for (int s = 0; s < values.num_states(); ++s) {
      int best = 0;
      for (int a = 1; a < values.num_actions(); ++a) {
        if (values.q(h, s, a) > values.q(h, s, best)) best = a;
      }
      policy(h, s) = best;
    }
  }
  return policy;
}

std::vector<double> evaluate_policy(const TabularMDP& mdp, const Policy& policy) {
  const int H = mdp.horizon();
  const int S = mdp.num_states();
  if (policy.horizon() != H || policy.num_states() != S) {
    throw ValidationError("policy shape does not match the MDP");
  }
  std::vector<double> value(static_cast<std::size_t>(H + 1) * S, 0.0);
  for (int h = H; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      const int a = policy(h, s);
      if (a < 0 || a >= mdp.num_actions()) {
        throw ValidationError("policy action out of range at h=" + std::to_string(h) +
                              ", s=" + std::to_string(s));
      }
      double v = mdp.reward(h, s, a);
      const auto row = mdp.row(h, s, a);
      for (const int next : mdp.support(h, s, a)) {
        v += row[next] * value[static_cast<std::size_t>(h) * S + next];
      }
      value[static_cast<std::size_t>(h - 1) * S + s] = v;
    }
  }
  return value;
}

StepResult step(const TabularMDP& mdp, RngStream& rng, int h, int s, int a) {
  mdp.check_indices(h, s, a);
  return {mdp.reward(h, s, a), mdp.sample_next(h, s, a, rng)};
}

std::vector<double> cumulative_regret(double v_star_at_start, std::span<const double> returns) {
  std::vector<double> out;
  out.reserve(returns.size());
  double total = 0.0;
  for (const double r : returns) {
    total += v_star_at_start - r;
    out.push_back(total);
  }
  return out;
}

}  // namespace psqlab

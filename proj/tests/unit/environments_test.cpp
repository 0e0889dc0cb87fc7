#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <queue>
#include <sstream>

#include "psqlab/environments.hpp"
#include "psqlab/mdp.hpp"

namespace psqlab {
namespace {

// Graph search over positive-probability transitions of the model itself.
bool model_reaches(const TabularMDP& mdp, int from, int target) {
  std::vector<bool> seen(static_cast<std::size_t>(mdp.num_states()), false);
  std::queue<int> q;
  q.push(from);
  seen[static_cast<std::size_t>(from)] = true;
  while (!q.empty()) {
    const int s = q.front();
    q.pop();
    if (s == target) return true;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      for (int next = 0; next < mdp.num_states(); ++next) {
        if (mdp.probability(1, s, a, next) > 0.0 && !seen[static_cast<std::size_t>(next)]) {
          seen[static_cast<std::size_t>(next)] = true;
          q.push(next);
        }
      }
    }
  }
  return false;
}

void expect_goal_only_rewards(const TabularMDP& mdp, int goal) {
  const int H = mdp.horizon();
  for (int h = 1; h <= H; ++h) {
    for (int s = 0; s < mdp.num_states(); ++s) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const double expected = s == goal ? static_cast<double>(H - h) / H : 0.0;
        EXPECT_EQ(mdp.reward(h, s, a), expected) << "h=" << h << " s=" << s;
      }
    }
  }
}

TEST(Chain, DeterministicInstanceValueMatchesShortestPath) {
  RngStream rng(1);
  ChainRanges ranges;
  ranges.p_min = ranges.p_max = 1.0;
  ranges.length_min = ranges.length_max = 7;
  const EnvironmentInstance inst = make_chain(rng, ranges);
  // Shortest path: 7 right moves, goal occupied at step 8.
  EXPECT_DOUBLE_EQ(solve_optimal(inst.mdp).v(1, 0), (32.0 - 8.0) / 32.0);

  // Always-right reaches the goal deterministically.
  Policy right(32, inst.mdp.num_states(), kChainRight);
  EXPECT_DOUBLE_EQ(evaluate_policy(inst.mdp, right)[0], 0.75);
}

TEST(Chain, ConstructionInvariants) {
  RngStream rng(2);
  for (int i = 0; i < 50; ++i) {
    const EnvironmentInstance inst = make_chain(rng, {});
    const auto& spec = std::get<ChainSpec>(inst.spec);
    EXPECT_GE(spec.p, 0.7);
    EXPECT_LE(spec.p, 0.95);
    EXPECT_GE(spec.length, 7);
    EXPECT_LE(spec.length, 14);
    EXPECT_EQ(inst.mdp.num_states(), spec.length + 2);
    EXPECT_EQ(inst.mdp.num_actions(), 2);
    EXPECT_EQ(inst.mdp.start_state(), 0);
    expect_goal_only_rewards(inst.mdp, spec.length);
    const int sink = spec.length + 1;
    EXPECT_EQ(inst.mdp.probability(3, spec.length, 0, sink), 1.0);
    EXPECT_EQ(inst.mdp.probability(3, sink, 1, sink), 1.0);
    EXPECT_NEAR(inst.mdp.probability(3, 0, kChainLeft, 0), spec.p, 1e-15);
  }
}

TEST(Chain, LengthIsUniformOverRange) {
  RngStream rng(3);
  constexpr int kDraws = 10000;
  std::vector<int> counts(8, 0);
  for (int i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(sample_chain_spec(rng, {}).length - 7)];
  double chi2 = 0.0;
  const double expected = kDraws / 8.0;
  for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, boost::math::quantile(boost::math::chi_squared(7), 1.0 - 1e-3));
}

TEST(Chain, OptimalValueNonincreasingInLength) {
  for (const double p : {0.7, 0.83, 0.95}) {
    double previous = 2.0;
    for (int length = 7; length <= 14; ++length) {
      const double v = solve_optimal(build_chain({p, length, 32})).v(1, 0);
      EXPECT_LE(v, previous);
      previous = v;
    }
  }
}

TEST(Chain, RejectsBadRanges) {
  RngStream rng(0);
  ChainRanges r;
  r.p_min = 0.9;
  r.p_max = 0.8;
  EXPECT_THROW(make_chain(rng, r), ValidationError);
  r = {};
  r.horizon = 10;
  EXPECT_THROW(make_chain(rng, r), ValidationError);
}

TEST(Grid, NoHolesGoalHasPositiveValue) {
  const TabularMDP mdp = build_grid({{}, 32});
  EXPECT_GT(solve_optimal(mdp).v(1, kGridStart), 0.0);
  expect_goal_only_rewards(mdp, kGridGoal);
}

TEST(Grid, EveryInstanceIsFeasible) {
  RngStream rng(4);
  for (int i = 0; i < 200; ++i) {
    const EnvironmentInstance inst = make_grid(rng, {});
    const auto& spec = std::get<GridSpec>(inst.spec);
    EXPECT_GE(spec.holes.size(), 2u);
    EXPECT_LE(spec.holes.size(), 5u);
    for (const int cell : spec.holes) {
      EXPECT_NE(cell, kGridStart);
      EXPECT_NE(cell, kGridGoal);
      // Holes drop straight into the sink.
      EXPECT_EQ(inst.mdp.probability(1, cell, 0, kGridSink), 1.0);
    }
    EXPECT_TRUE(model_reaches(inst.mdp, kGridStart, kGridGoal));
    EXPECT_GT(solve_optimal(inst.mdp).v(1, kGridStart), 0.0);
    expect_goal_only_rewards(inst.mdp, kGridGoal);
  }
}

TEST(Grid, InteriorRightMoveSlipFrequencies) {
  const TabularMDP mdp = build_grid({{}, 32});
  RngStream rng(5);
  constexpr int kDraws = 100000;
  const int cell = 5;  // row 1, col 1
  std::map<int, int> counts;
  for (int i = 0; i < kDraws; ++i) ++counts[step(mdp, rng, 1, cell, kGridRight).next_state];
  EXPECT_EQ(counts.size(), 3u);
  EXPECT_NEAR(counts[6] / double(kDraws), 1.0 / 3.0, 0.005);  // right
  EXPECT_NEAR(counts[1] / double(kDraws), 1.0 / 3.0, 0.005);  // up
  EXPECT_NEAR(counts[9] / double(kDraws), 1.0 / 3.0, 0.005);  // down
}

TEST(Grid, WallBumpKeepsAgentInPlace) {
  const TabularMDP mdp = build_grid({{}, 32});
  // Corner (0,0), action up: forward and left both bump, right moves.
  EXPECT_NEAR(mdp.probability(1, 0, kGridUp, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mdp.probability(1, 0, kGridUp, 1), 1.0 / 3.0, 1e-15);
}

TEST(Grid, RejectsInfeasibleRanges) {
  RngStream rng(0);
  GridRanges r;
  r.holes_min = 3;
  r.holes_max = 12;
  EXPECT_THROW(make_grid(rng, r), ValidationError);
  EXPECT_THROW(build_grid({{1, 4}, 32}), ValidationError);  // start boxed in
}

TEST(Generators, SameSeedSameInstance) {
  for (const auto family : {EnvFamily::kChain, EnvFamily::kGrid}) {
    RngStream a(42);
    RngStream b(42);
    const auto x = family == EnvFamily::kChain ? make_chain(a, {}) : make_grid(a, {});
    const auto y = family == EnvFamily::kChain ? make_chain(b, {}) : make_grid(b, {});
    EXPECT_EQ(x.mdp.transitions(), y.mdp.transitions());
    EXPECT_EQ(x.mdp.rewards(), y.mdp.rewards());
  }
}

TEST(Serialization, RoundTripIsExact) {
  RngStream rng(6);
  for (const auto family : {EnvFamily::kChain, EnvFamily::kGrid}) {
    const auto inst = family == EnvFamily::kChain ? make_chain(rng, {}) : make_grid(rng, {});
    std::stringstream ss;
    write_instance(ss, inst);
    const EnvironmentInstance back = read_instance(ss);
    EXPECT_EQ(back.family, family);
    EXPECT_EQ(back.mdp.transitions(), inst.mdp.transitions());
    EXPECT_EQ(back.mdp.rewards(), inst.mdp.rewards());
    EXPECT_EQ(back.mdp.start_state(), inst.mdp.start_state());
    if (family == EnvFamily::kChain) {
      EXPECT_EQ(std::get<ChainSpec>(back.spec).p, std::get<ChainSpec>(inst.spec).p);
    } else {
      EXPECT_EQ(std::get<GridSpec>(back.spec).holes, std::get<GridSpec>(inst.spec).holes);
    }
  }
}

TEST(Serialization, MalformedInputIsRejected) {
  RngStream rng(7);
  std::stringstream ss;
  write_instance(ss, make_chain(rng, {}));
  const std::string good = ss.str();

  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_instance(in);
  };
  EXPECT_THROW(parse(""), ValidationError);
  EXPECT_THROW(parse(good + "bogus = 1\n"), ValidationError);
  EXPECT_THROW(parse(good + "no equals sign\n"), ValidationError);
  std::string bad_row = good;
  bad_row.replace(bad_row.find("transition.1.0.0 = "), 19, "transition.1.0.0 = 0.5 ");
  EXPECT_THROW(parse(bad_row), ValidationError);
  const std::string truncated = good.substr(0, good.size() / 2);
  EXPECT_THROW(parse(truncated), ValidationError);
}

}  // namespace
}  // namespace psqlab

#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "psqlab/mdp.hpp"
#include "psqlab/rng.hpp"

namespace psqlab {

// Both benchmark families share three conventions:
//  * one extra zero-reward absorbing sink state (the last state index);
//  * a goal state pays (H - h) / H when occupied at step h (i.e. the step at
//    which it was entered), for every action, then moves to the sink;
//  * nothing else pays reward.

struct ChainSpec {
  double p = 0.8;
  int length = 7;  ///< goal state index; states are 0..length plus the sink
  int horizon = 32;
};

struct ChainRanges {
  double p_min = 0.7;
  double p_max = 0.95;
  int length_min = 7;
  int length_max = 14;
  int horizon = 32;

  void validate() const;
};

inline constexpr int kChainLeft = 0;
inline constexpr int kChainRight = 1;

/// Builds the chain MDP for a fixed spec.
TabularMDP build_chain(const ChainSpec& spec);

/// Draws p ~ U[p_min, p_max] and length ~ U{length_min..length_max}.
ChainSpec sample_chain_spec(RngStream& rng, const ChainRanges& ranges);

struct GridSpec {
  static constexpr int kSide = 4;
  std::vector<int> holes;  ///< sorted cell indices (row * 4 + col)
  int horizon = 32;
};

struct GridRanges {
  int holes_min = 2;
  int holes_max = 5;
  int horizon = 32;

  void validate() const;
};

enum GridAction : int { kGridLeft = 0, kGridDown = 1, kGridRight = 2, kGridUp = 3 };

inline constexpr int kGridStart = 0;
inline constexpr int kGridGoal = GridSpec::kSide * GridSpec::kSide - 1;
inline constexpr int kGridSink = GridSpec::kSide * GridSpec::kSide;

/// True when the goal is reachable from the start through non-hole cells.
bool grid_goal_reachable(const std::vector<int>& holes);

TabularMDP build_grid(const GridSpec& spec);

/// Draws a hole count uniformly in [holes_min, holes_max] and resamples the
/// placement until the goal is reachable.
GridSpec sample_grid_spec(RngStream& rng, const GridRanges& ranges);

enum class EnvFamily { kChain, kGrid };

std::string to_string(EnvFamily family);
EnvFamily parse_env_family(const std::string& text);

struct EnvironmentInstance {
  EnvFamily family;
  std::variant<ChainSpec, GridSpec> spec;
  TabularMDP mdp;
};

EnvironmentInstance make_chain(RngStream& rng, const ChainRanges& ranges);
EnvironmentInstance make_grid(RngStream& rng, const GridRanges& ranges);

/// Writes the instance as `key = value` lines: the spec fields followed by
/// every transition row and reward entry. Doubles round-trip exactly.
void write_instance(std::ostream& out, const EnvironmentInstance& instance);

/// Parses `write_instance` output. Any malformed line, unknown key or model
/// invariant violation raises ValidationError.
EnvironmentInstance read_instance(std::istream& in);

/// Largest reward-to-go of any state in the family's normalized payout.
inline constexpr double kNormalizedVMax = 1.0;

}  // namespace psqlab

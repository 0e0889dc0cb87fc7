#include "psqlab/environments.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>

namespace psqlab {

namespace {

struct TensorBuilder {
  int horizon;
  int num_states;
  int num_actions;
  std::vector<double> transitions;
  std::vector<double> rewards;

  TensorBuilder(int H, int S, int A)
      : horizon(H),
        num_states(S),
        num_actions(A),
        transitions(static_cast<std::size_t>(H) * S * A * S, 0.0),
        rewards(static_cast<std::size_t>(H) * S * A, 0.0) {}

  std::size_t sa(int h, int s, int a) const {
    return (static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a;
  }
  double& p(int h, int s, int a, int next) { return transitions[sa(h, s, a) * num_states + next]; }
  double& r(int h, int s, int a) { return rewards[sa(h, s, a)]; }

  TabularMDP finish(int start) && {
    return TabularMDP(horizon, num_states, num_actions, start, std::move(transitions),
                      std::move(rewards));
  }
};

double goal_payout(int h, int horizon) {
  return static_cast<double>(horizon - h) / static_cast<double>(horizon);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

constexpr int kGridCells = GridSpec::kSide * GridSpec::kSide;

int grid_move(int cell, int action) {
  const int row = cell / GridSpec::kSide;
  const int col = cell % GridSpec::kSide;
  int r = row;
  int c = col;
  switch (action) {
    case kGridLeft: --c; break;
    case kGridDown: ++r; break;
    case kGridRight: ++c; break;
    case kGridUp: --r; break;
    default: break;
  }
  if (r < 0 || r >= GridSpec::kSide || c < 0 || c >= GridSpec::kSide) return cell;
  return r * GridSpec::kSide + c;
}

std::array<int, 2> perpendicular(int action) {
  if (action == kGridLeft || action == kGridRight) return {kGridUp, kGridDown};
  return {kGridLeft, kGridRight};
}

}  // namespace

void ChainRanges::validate() const {
  if (!(p_min > 0.0 && p_min <= p_max && p_max <= 1.0)) {
    throw ValidationError("chain p range must satisfy 0 < p_min <= p_max <= 1");
  }
  if (length_min < 1 || length_min > length_max) {
    throw ValidationError("chain length range must satisfy 1 <= length_min <= length_max");
  }
  if (horizon < length_max + 1) {
    throw ValidationError("chain horizon must be at least length_max + 1");
  }
}

TabularMDP build_chain(const ChainSpec& spec) {
  if (!(spec.p > 0.0 && spec.p <= 1.0) || spec.length < 1 || spec.horizon < 1) {
    throw ValidationError("invalid chain spec");
  }
  const int H = spec.horizon;
  const int goal = spec.length;
  const int sink = goal + 1;
  const int S = goal + 2;
  TensorBuilder b(H, S, 2);
  for (int h = 1; h <= H; ++h) {
    for (int s = 0; s < goal; ++s) {
      const int left = std::max(s - 1, 0);
      const int right = s + 1;
      b.p(h, s, kChainLeft, left) += spec.p;
      b.p(h, s, kChainLeft, right) += 1.0 - spec.p;
      b.p(h, s, kChainRight, right) += spec.p;
      b.p(h, s, kChainRight, left) += 1.0 - spec.p;
    }
    for (int a = 0; a < 2; ++a) {
      b.r(h, goal, a) = goal_payout(h, H);
      b.p(h, goal, a, sink) = 1.0;
      b.p(h, sink, a, sink) = 1.0;
    }
  }
  return std::move(b).finish(0);
}

ChainSpec sample_chain_spec(RngStream& rng, const ChainRanges& ranges) {
  ranges.validate();
  ChainSpec spec;
  spec.p = ranges.p_min == ranges.p_max ? ranges.p_min : rng.uniform(ranges.p_min, ranges.p_max);
  spec.length = rng.uniform_int(ranges.length_min, ranges.length_max);
  spec.horizon = ranges.horizon;
  return spec;
}

void GridRanges::validate() const {
  // A start-to-goal path on a 4x4 grid uses at least 7 cells.
  constexpr int kMaxFeasibleHoles = kGridCells - 7;
  if (holes_min < 0 || holes_min > holes_max || holes_max > kMaxFeasibleHoles) {
    throw ValidationError("grid hole range must satisfy 0 <= holes_min <= holes_max <= " +
                          std::to_string(kMaxFeasibleHoles));
  }
  if (horizon < 1) throw ValidationError("grid horizon must be positive");
}

bool grid_goal_reachable(const std::vector<int>& holes) {
  std::array<bool, kGridCells> blocked{};
  for (const int cell : holes) {
    if (cell >= 0 && cell < kGridCells) blocked[static_cast<std::size_t>(cell)] = true;
  }
  if (blocked[kGridStart] || blocked[kGridGoal]) return false;
  std::array<bool, kGridCells> seen{};
  std::queue<int> frontier;
  frontier.push(kGridStart);
  seen[kGridStart] = true;
  while (!frontier.empty()) {
    const int cell = frontier.front();
    frontier.pop();
    if (cell == kGridGoal) return true;
    for (int a = 0; a < 4; ++a) {
      const int next = grid_move(cell, a);
      if (!blocked[static_cast<std::size_t>(next)] && !seen[static_cast<std::size_t>(next)]) {
        seen[static_cast<std::size_t>(next)] = true;
        frontier.push(next);
      }
    }
  }
  return false;
}

TabularMDP build_grid(const GridSpec& spec) {
  if (spec.horizon < 1) throw ValidationError("grid horizon must be positive");
  if (!grid_goal_reachable(spec.holes)) {
    throw ValidationError("grid spec has no hole-free path from start to goal");
  }
  const int H = spec.horizon;
  const int S = kGridCells + 1;
  std::array<bool, kGridCells> is_hole{};
  for (const int cell : spec.holes) is_hole[static_cast<std::size_t>(cell)] = true;

  TensorBuilder b(H, S, 4);
  const double third = 1.0 / 3.0;
  for (int h = 1; h <= H; ++h) {
    for (int a = 0; a < 4; ++a) {
      b.p(h, kGridSink, a, kGridSink) = 1.0;
      for (int cell = 0; cell < kGridCells; ++cell) {
        if (cell == kGridGoal) {
          b.r(h, cell, a) = goal_payout(h, H);
          b.p(h, cell, a, kGridSink) = 1.0;
        } else if (is_hole[static_cast<std::size_t>(cell)]) {
          b.p(h, cell, a, kGridSink) = 1.0;
        } else {
          const auto side = perpendicular(a);
          b.p(h, cell, a, grid_move(cell, a)) += third;
          b.p(h, cell, a, grid_move(cell, side[0])) += third;
          b.p(h, cell, a, grid_move(cell, side[1])) += third;
        }
      }
    }
  }
  return std::move(b).finish(kGridStart);
}

GridSpec sample_grid_spec(RngStream& rng, const GridRanges& ranges) {
  ranges.validate();
  constexpr int kMaxAttempts = 100000;
  const int count = rng.uniform_int(ranges.holes_min, ranges.holes_max);
  std::vector<int> candidates;
  for (int cell = 0; cell < kGridCells; ++cell) {
    if (cell != kGridStart && cell != kGridGoal) candidates.push_back(cell);
  }
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    // Partial Fisher-Yates draws `count` distinct cells.
    std::vector<int> pool = candidates;
    for (int i = 0; i < count; ++i) {
      const int j = rng.uniform_int(i, static_cast<int>(pool.size()) - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::vector<int> holes(pool.begin(), pool.begin() + count);
    std::sort(holes.begin(), holes.end());
    if (grid_goal_reachable(holes)) return GridSpec{std::move(holes), ranges.horizon};
  }
  throw ValidationError("could not place grid holes with a feasible path");
}

std::string to_string(EnvFamily family) {
  return family == EnvFamily::kChain ? "chain" : "grid";
}

EnvFamily parse_env_family(const std::string& text) {
  if (text == "chain") return EnvFamily::kChain;
  if (text == "grid") return EnvFamily::kGrid;
  throw ValidationError("unknown environment family '" + text + "' (expected chain or grid)");
}

EnvironmentInstance make_chain(RngStream& rng, const ChainRanges& ranges) {
  ChainSpec spec = sample_chain_spec(rng, ranges);
  TabularMDP mdp = build_chain(spec);
  return {EnvFamily::kChain, spec, std::move(mdp)};
}

EnvironmentInstance make_grid(RngStream& rng, const GridRanges& ranges) {
  GridSpec spec = sample_grid_spec(rng, ranges);
  TabularMDP mdp = build_grid(spec);
  return {EnvFamily::kGrid, std::move(spec), std::move(mdp)};
}

void write_instance(std::ostream& out, const EnvironmentInstance& instance) {
  const TabularMDP& mdp = instance.mdp;
  out << "format = psqlab-mdp-v1\n";
  out << "family = " << to_string(instance.family) << "\n";
  if (const auto* chain = std::get_if<ChainSpec>(&instance.spec)) {
    out << "chain.p = " << format_double(chain->p) << "\n";
    out << "chain.length = " << chain->length << "\n";
  } else if (const auto* grid = std::get_if<GridSpec>(&instance.spec)) {
    out << "grid.holes =";
    for (const int cell : grid->holes) out << ' ' << cell;
    out << "\n";
  }
  out << "horizon = " << mdp.horizon() << "\n";
  out << "num_states = " << mdp.num_states() << "\n";
  out << "num_actions = " << mdp.num_actions() << "\n";
  out << "start_state = " << mdp.start_state() << "\n";
  for (int h = 1; h <= mdp.horizon(); ++h) {
    for (int s = 0; s < mdp.num_states(); ++s) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        out << "reward." << h << '.' << s << '.' << a << " = "
            << format_double(mdp.reward(h, s, a)) << "\n";
        out << "transition." << h << '.' << s << '.' << a << " =";
        for (const double p : mdp.row(h, s, a)) out << ' ' << format_double(p);
        out << "\n";
      }
    }
  }
}

namespace {

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ValidationError("cannot parse value '" + text + "' for key '" + key + "'");
  }
  return value;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string token;
  while (is >> token) out.push_back(token);
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Parses "h.s.a" after a tensor key prefix.
std::array<int, 3> parse_index(const std::string& suffix, const std::string& key) {
  std::array<int, 3> idx{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t dot = suffix.find('.', pos);
    const std::string part =
        suffix.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    idx[static_cast<std::size_t>(i)] = parse_number<int>(part, key);
    if (i < 2) {
      if (dot == std::string::npos) throw ValidationError("malformed tensor key '" + key + "'");
      pos = dot + 1;
    } else if (dot != std::string::npos) {
      throw ValidationError("malformed tensor key '" + key + "'");
    }
  }
  return idx;
}

}  // namespace

EnvironmentInstance read_instance(std::istream& in) {
  std::map<std::string, std::string> scalars;
  std::vector<std::pair<std::string, std::string>> tensor_lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.rfind("reward.", 0) == 0 || key.rfind("transition.", 0) == 0) {
      tensor_lines.emplace_back(std::move(key), std::move(value));
    } else {
      static const std::array<const char*, 9> kKnown = {
          "format",     "family",      "chain.p",     "chain.length", "grid.holes",
          "horizon",    "num_states",  "num_actions", "start_state"};
      if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
        throw ValidationError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
      if (!scalars.emplace(key, value).second) {
        throw ValidationError("duplicate key '" + key + "'");
      }
    }
  }
  auto require = [&](const std::string& key) -> const std::string& {
    const auto it = scalars.find(key);
    if (it == scalars.end()) throw ValidationError("missing key '" + key + "'");
    return it->second;
  };
  if (require("format") != "psqlab-mdp-v1") throw ValidationError("unsupported format version");
  const EnvFamily family = parse_env_family(require("family"));
  const int H = parse_number<int>(require("horizon"), "horizon");
  const int S = parse_number<int>(require("num_states"), "num_states");
  const int A = parse_number<int>(require("num_actions"), "num_actions");
  const int start = parse_number<int>(require("start_state"), "start_state");
  if (H < 1 || S < 1 || A < 1) throw ValidationError("dimensions must be positive");

  TensorBuilder b(H, S, A);
  const std::size_t rows = static_cast<std::size_t>(H) * S * A;
  std::vector<char> seen_reward(rows, 0);
  std::vector<char> seen_row(rows, 0);
  for (const auto& [key, value] : tensor_lines) {
    const bool is_reward = key.rfind("reward.", 0) == 0;
    const auto idx = parse_index(key.substr(is_reward ? 7 : 11), key);
    const int h = idx[0];
    const int s = idx[1];
    const int a = idx[2];
    if (h < 1 || h > H || s < 0 || s >= S || a < 0 || a >= A) {
      throw ValidationError("index out of range in key '" + key + "'");
    }
    const std::size_t row_id = b.sa(h, s, a);
    if (is_reward) {
      if (seen_reward[row_id]++) throw ValidationError("duplicate key '" + key + "'");
      b.r(h, s, a) = parse_number<double>(value, key);
    } else {
      if (seen_row[row_id]++) throw ValidationError("duplicate key '" + key + "'");
      const auto tokens = split_ws(value);
      if (static_cast<int>(tokens.size()) != S) {
        throw ValidationError("transition row '" + key + "' needs " + std::to_string(S) +
                              " entries");
      }
      for (int next = 0; next < S; ++next) {
        b.p(h, s, a, next) = parse_number<double>(tokens[static_cast<std::size_t>(next)], key);
      }
    }
  }
  if (std::count(seen_reward.begin(), seen_reward.end(), 1) != static_cast<long>(rows) ||
      std::count(seen_row.begin(), seen_row.end(), 1) != static_cast<long>(rows)) {
    throw ValidationError("instance is missing reward or transition entries");
  }

  TabularMDP mdp = std::move(b).finish(start);
  if (family == EnvFamily::kChain) {
    ChainSpec spec;
    spec.p = parse_number<double>(require("chain.p"), "chain.p");
    spec.length = parse_number<int>(require("chain.length"), "chain.length");
    spec.horizon = H;
    return {family, spec, std::move(mdp)};
  }
  GridSpec spec;
  spec.horizon = H;
  for (const auto& token : split_ws(require("grid.holes"))) {
    spec.holes.push_back(parse_number<int>(token, "grid.holes"));
  }
  return {family, std::move(spec), std::move(mdp)};
}

}  // namespace psqlab

#include "psqlab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psqlab {

namespace {

double initial_value(InitMode mode, int h, const AgentContext& ctx, double scale) {
  switch (mode) {
    case InitMode::kVMax: return ctx.v_max;
    case InitMode::kHorizon: return ctx.horizon;
    case InitMode::kRemaining:
      return scale * static_cast<double>(ctx.horizon - h) / static_cast<double>(ctx.horizon);
  }
  return ctx.v_max;
}

double log_sat(const AgentContext& ctx, double delta) {
  return std::log(static_cast<double>(ctx.num_states) * ctx.num_actions *
                  static_cast<double>(ctx.total_steps()) / delta);
}

void check_context(const AgentContext& ctx) {
  if (ctx.horizon < 1 || ctx.num_states < 1 || ctx.num_actions < 1 || ctx.episodes < 1) {
    throw ValidationError("agent context dimensions must be positive");
  }
  if (!(ctx.v_max > 0.0)) throw ValidationError("v_max must be positive");
}

}  // namespace

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kVMax: return "vmax";
    case InitMode::kHorizon: return "horizon";
    case InitMode::kRemaining: return "remaining";
  }
  return "unknown";
}

InitMode parse_init_mode(const std::string& text) {
  if (text == "vmax") return InitMode::kVMax;
  if (text == "horizon") return InitMode::kHorizon;
  if (text == "remaining") return InitMode::kRemaining;
  throw ValidationError("unknown init mode '" + text + "' (expected vmax, horizon or remaining)");
}

void AgentConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(c_tuned > 0.0)) throw ValidationError("c_tuned must be positive");
  if (!(c_ucb >= 0.0)) throw ValidationError("c_ucb must be nonnegative");
  if (!(c_rlsvi >= 0.0)) throw ValidationError("c_rlsvi must be nonnegative");
  if (!(c_bernstein > 0.0)) throw ValidationError("c_bernstein must be positive");
  if (bernstein_cap == VarianceMode::kBernstein) {
    throw ValidationError("bernstein_cap must be hoeffding or tuned");
  }
  if (j_override && *j_override < 1) throw ValidationError("J override must be at least 1");
  if (staged_ensemble < 1) throw ValidationError("staged ensemble size must be at least 1");
  if (!(staged_kappa > 0.0)) throw ValidationError("staged kappa must be positive");
  if (!(staged_r0 > 0.0)) throw ValidationError("staged r0 must be positive");
}

AgentConfig AgentConfig::theoretical() {
  AgentConfig config;
  config.variance_mode = VarianceMode::kHoeffding;
  config.bernstein_cap = VarianceMode::kHoeffding;
  config.init = InitMode::kHorizon;
  config.clip_estimates = false;
  return config;
}

// ---------------------------------------------------------------------------

Agent::Agent(const AgentContext& context, std::uint64_t seed) : context_(context), rng_(seed) {
  check_context(context_);
}

void Agent::begin_episode(bool commit_policy) {
  on_begin_episode();
  commit_ = commit_policy;
  if (!commit_) return;
  committed_ = Policy(context_.horizon, context_.num_states);
  for (int h = 1; h <= context_.horizon; ++h) {
    for (int s = 0; s < context_.num_states; ++s) committed_(h, s) = choose(h, s);
  }
}

int Agent::select_action(int h, int s) {
  ++select_calls_;
  return commit_ ? committed_(h, s) : choose(h, s);
}

void Agent::observe(const Transition& t) {
  ++observe_calls_;
  update(t);
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t a = 1; a < values.size(); ++a) {
    if (values[a] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  return best;
}

int sample_argmax(std::span<const double> means, std::span<const double> sds, RngStream& rng) {
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means.size(); ++a) {
    const double sample = means[a] + sds[a] * rng.normal();
    if (sample > best_value) {
      best_value = sample;
      best = static_cast<int>(a);
    }
  }
  return best;
}

double optimistic_next_value(std::span<const double> means, std::span<const double> sds, int J,
                             RngStream& rng) {
  const auto a_hat = static_cast<std::size_t>(argmax(means));
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < J; ++j) best = std::max(best, means[a_hat] + sds[a_hat] * rng.normal());
  return best;
}

double vanilla_next_value(std::span<const double> means, std::span<const double> sds,
                          RngStream& rng) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means.size(); ++a) {
    best = std::max(best, means[a] + sds[a] * rng.normal());
  }
  return best;
}

// ---------------------------------------------------------------------------

PosteriorSamplingAgent::PosteriorSamplingAgent(std::string name, TargetRule rule,
                                               const AgentConfig& config,
                                               const AgentContext& context)
    : Agent(context, config.seed),
      name_(std::move(name)),
      rule_(rule),
      clip_(config.clip_estimates) {
  config.validate();
  const AgentContext& ctx = this->context();
  params_.mode = config.variance_mode;
  params_.sigma_sq = config.sigma_sq;
  params_.c_tuned = config.c_tuned;
  params_.v_max = ctx.v_max;
  params_.c_bernstein = config.c_bernstein;
  params_.bernstein_cap = config.bernstein_cap;
  params_.num_states = ctx.num_states;
  params_.num_actions = ctx.num_actions;

  if (rule_ == TargetRule::kOptimistic || params_.mode == VarianceMode::kBernstein) {
    J_ = config.j_override ? *config.j_override
                           : compute_J(config.delta, ctx.num_states, ctx.num_actions,
                                       ctx.total_steps(), ctx.horizon);
  }
  if (params_.mode == VarianceMode::kBernstein) {
    const double SA = static_cast<double>(ctx.num_states) * ctx.num_actions;
    params_.eta = std::log(SA * static_cast<double>(ctx.episodes) * ctx.horizon / config.delta);
    params_.chi = std::log(J_ * SA * static_cast<double>(ctx.total_steps()) / config.delta);
    table_.bernstein.assign(sa_count(), {});
  }

  const InitMode init = config.init.value_or(InitMode::kVMax);
  table_.mean.resize(sa_count());
  table_.count.assign(sa_count(), 0);
  for (int h = 1; h <= ctx.horizon; ++h) {
    const double v0 = initial_value(init, h, ctx, ctx.v_max);
    for (int s = 0; s < ctx.num_states; ++s) {
      for (int a = 0; a < ctx.num_actions; ++a) table_.mean[sa_index(h, s, a)] = v0;
    }
  }
  means_scratch_.resize(static_cast<std::size_t>(ctx.num_actions));
  sds_scratch_.resize(static_cast<std::size_t>(ctx.num_actions));
}

double PosteriorSamplingAgent::posterior_variance(int h, int s, int a) const {
  const std::size_t i = sa_index(h, s, a);
  const BernsteinAccumulators* acc = table_.bernstein.empty() ? nullptr : &table_.bernstein[i];
  return variance(table_.count[i], context().horizon, params_, acc);
}

void PosteriorSamplingAgent::fill_row(int h, int s, std::vector<double>& means,
                                      std::vector<double>& sds) const {
  for (int a = 0; a < context().num_actions; ++a) {
    means[static_cast<std::size_t>(a)] = table_.mean[sa_index(h, s, a)];
    sds[static_cast<std::size_t>(a)] = std::sqrt(posterior_variance(h, s, a));
  }
}

int PosteriorSamplingAgent::choose(int h, int s) {
  fill_row(h, s, means_scratch_, sds_scratch_);
  return sample_argmax(means_scratch_, sds_scratch_, rng());
}

void PosteriorSamplingAgent::update(const Transition& t) {
  const int H = context().horizon;
  double z = t.reward;
  if (t.h < H) {
    fill_row(t.h + 1, t.next_state, means_scratch_, sds_scratch_);
    z += rule_ == TargetRule::kOptimistic
             ? optimistic_next_value(means_scratch_, sds_scratch_, J_, rng())
             : vanilla_next_value(means_scratch_, sds_scratch_, rng());
  }
  const std::size_t i = sa_index(t.h, t.state, t.action);
  const long n = ++table_.count[i];
  double mean = update_mean(table_.mean[i], z, n, H);
  if (clip_) mean = std::clamp(mean, 0.0, context().v_max);
  table_.mean[i] = mean;
  if (!table_.bernstein.empty()) bernstein_update(table_.bernstein[i], z, t.reward);
}

// ---------------------------------------------------------------------------

double ucb_bonus(double c, double v_max, long n, double log_term) {
  if (n < 1) throw ValidationError("ucb_bonus requires n >= 1");
  return std::sqrt(c * v_max * v_max * log_term / static_cast<double>(n));
}

UcbqlAgent::UcbqlAgent(const AgentConfig& config, const AgentContext& context)
    : Agent(context, config.seed),
      c_(config.c_ucb),
      log_term_(log_sat(context, config.delta)),
      value_cap_(config.clip_estimates ? context.v_max : context.horizon),
      clip_(config.clip_estimates),
      q_(sa_count()),
      n_(sa_count(), 0) {
  config.validate();
  const InitMode init = config.init.value_or(InitMode::kVMax);
  for (int h = 1; h <= context.horizon; ++h) {
    const double v0 = initial_value(init, h, context, context.v_max);
    for (int s = 0; s < context.num_states; ++s) {
      for (int a = 0; a < context.num_actions; ++a) q_[sa_index(h, s, a)] = v0;
    }
  }
}

int UcbqlAgent::choose(int h, int s) {
  return argmax(std::span<const double>(q_).subspan(sa_index(h, s, 0),
                                                   static_cast<std::size_t>(context().num_actions)));
}

void UcbqlAgent::update(const Transition& t) {
  const int H = context().horizon;
  double next_value = 0.0;
  if (t.h < H) {
    const auto row = std::span<const double>(q_).subspan(
        sa_index(t.h + 1, t.next_state, 0), static_cast<std::size_t>(context().num_actions));
    next_value = std::min(value_cap_, *std::max_element(row.begin(), row.end()));
  }
  const std::size_t i = sa_index(t.h, t.state, t.action);
  const long n = ++n_[i];
  const double target = t.reward + next_value + ucb_bonus(c_, context().v_max, n, log_term_);
  double q = update_mean(q_[i], target, n, H);
  if (clip_) q = std::clamp(q, 0.0, context().v_max);
  q_[i] = q;
}

// ---------------------------------------------------------------------------

double rlsvi_noise_stddev(double c, double v_max, long n, double log_term) {
  if (n < 0) throw ValidationError("rlsvi noise requires n >= 0");
  return std::sqrt(c * v_max * v_max * log_term / static_cast<double>(n + 1));
}

RlsviAgent::RlsviAgent(const AgentConfig& config, const AgentContext& context)
    : Agent(context, config.seed),
      c_(config.c_rlsvi),
      log_term_(log_sat(context, config.delta)),
      clip_(config.clip_estimates),
      n_(sa_count(), 0),
      reward_sum_(sa_count(), 0.0),
      successors_(sa_count()),
      q_(sa_count(), 0.0),
      v_(static_cast<std::size_t>(context.horizon + 1) * context.num_states, 0.0) {
  config.validate();
  const InitMode init = config.init.value_or(InitMode::kVMax);
  init_value_ = initial_value(init, 1, context, context.v_max);
}

std::vector<double> RlsviAgent::empirical_transition(int h, int s, int a) const {
  std::vector<double> row(static_cast<std::size_t>(context().num_states), 0.0);
  const std::size_t i = sa_index(h, s, a);
  if (n_[i] == 0) return row;
  for (const auto& succ : successors_[i]) {
    row[static_cast<std::size_t>(succ.state)] =
        static_cast<double>(succ.count) / static_cast<double>(n_[i]);
  }
  return row;
}

void RlsviAgent::on_begin_episode() {
  const AgentContext& ctx = context();
  const int S = ctx.num_states;
  const int A = ctx.num_actions;
  std::fill(v_.begin() + static_cast<std::ptrdiff_t>(ctx.horizon) * S, v_.end(), 0.0);
  for (int h = ctx.horizon; h >= 1; --h) {
    const std::size_t next_base = static_cast<std::size_t>(h) * S;
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        const std::size_t i = sa_index(h, s, a);
        const long n = n_[i];
        double q = init_value_;
        if (n > 0) {
          const double inv_n = 1.0 / static_cast<double>(n);
          q = reward_sum_[i] * inv_n +
              rlsvi_noise_stddev(c_, ctx.v_max, n, log_term_) * rng().normal();
          for (const auto& succ : successors_[i]) {
            q += static_cast<double>(succ.count) * inv_n * v_[next_base + succ.state];
          }
        }
        q_[i] = q;
        best = std::max(best, q);
      }
      if (clip_) best = std::clamp(best, 0.0, ctx.v_max);
      v_[static_cast<std::size_t>(h - 1) * S + s] = best;
    }
  }
}

int RlsviAgent::choose(int h, int s) {
  return argmax(std::span<const double>(q_).subspan(sa_index(h, s, 0),
                                                   static_cast<std::size_t>(context().num_actions)));
}

void RlsviAgent::update(const Transition& t) {
  const std::size_t i = sa_index(t.h, t.state, t.action);
  ++n_[i];
  reward_sum_[i] += t.reward;
  auto& succ = successors_[i];
  const auto it = std::find_if(succ.begin(), succ.end(),
                               [&](const Successor& x) { return x.state == t.next_state; });
  if (it != succ.end()) {
    ++it->count;
  } else {
    succ.push_back({t.next_state, 1});
  }
}

// ---------------------------------------------------------------------------

long staged_randql_stage_length(int stage, int horizon) {
  const double H = horizon;
  return static_cast<long>(std::floor(std::pow(1.0 + 1.0 / H, stage) * H));
}

StagedRandQlAgent::StagedRandQlAgent(const AgentConfig& config, const AgentContext& context)
    : Agent(context, config.seed),
      ensemble_(config.staged_ensemble),
      kappa_(config.staged_kappa),
      n0_(config.staged_n0 > 0.0 ? config.staged_n0 : 1.0 / context.num_states),
      r0_(config.staged_r0),
      init_(config.init.value_or(InitMode::kRemaining)),
      clip_(config.clip_estimates),
      q_bar_(sa_count()),
      q_tilde_(sa_count() * static_cast<std::size_t>(config.staged_ensemble)),
      stage_count_(sa_count(), 0),
      stage_(sa_count(), 0) {
  config.validate();
  for (int h = 1; h <= context.horizon; ++h) {
    const double v0 = init_value(h);
    for (int s = 0; s < context.num_states; ++s) {
      for (int a = 0; a < context.num_actions; ++a) {
        const std::size_t i = sa_index(h, s, a);
        q_bar_[i] = v0;
        std::fill_n(q_tilde_.begin() + static_cast<std::ptrdiff_t>(i * ensemble_), ensemble_, v0);
      }
    }
  }
}

double StagedRandQlAgent::init_value(int h) const {
  return initial_value(init_, h, context(), init_ == InitMode::kRemaining ? r0_ : context().v_max);
}

int StagedRandQlAgent::choose(int h, int s) {
  return argmax(std::span<const double>(q_bar_).subspan(
      sa_index(h, s, 0), static_cast<std::size_t>(context().num_actions)));
}

void StagedRandQlAgent::update(const Transition& t) {
  const AgentContext& ctx = context();
  double next_value = 0.0;
  if (t.h < ctx.horizon) {
    const auto row = std::span<const double>(q_bar_).subspan(
        sa_index(t.h + 1, t.next_state, 0), static_cast<std::size_t>(ctx.num_actions));
    next_value = *std::max_element(row.begin(), row.end());
  }
  const double target = t.reward + next_value;
  const std::size_t i = sa_index(t.h, t.state, t.action);
  const long n = ++stage_count_[i];
  double* ensemble = q_tilde_.data() + i * static_cast<std::size_t>(ensemble_);
  for (int j = 0; j < ensemble_; ++j) {
    const double w = rng().beta(1.0 / kappa_, (static_cast<double>(n) + n0_) / kappa_);
    ensemble[j] = (1.0 - w) * ensemble[j] + w * target;
  }
  if (n >= staged_randql_stage_length(stage_[i], ctx.horizon)) {
    double best = *std::max_element(ensemble, ensemble + ensemble_);
    if (clip_) best = std::clamp(best, 0.0, ctx.v_max);
    q_bar_[i] = best;
    std::fill_n(ensemble, ensemble_, init_value(t.h));
    stage_count_[i] = 0;
    ++stage_[i];
  }
}

// ---------------------------------------------------------------------------

int RandomAgent::choose(int, int) { return rng().uniform_int(0, context().num_actions - 1); }

OracleAgent::OracleAgent(const ValueTables& optimal, const AgentContext& context,
                         std::uint64_t seed)
    : Agent(context, seed), policy_(greedy_policy(optimal)) {
  if (optimal.horizon() != context.horizon || optimal.num_states() != context.num_states ||
      optimal.num_actions() != context.num_actions) {
    throw ValidationError("oracle value tables do not match the agent context");
  }
}

const std::vector<std::string>& agent_names() {
  static const std::vector<std::string> kNames = {"psql",  "psql-star",     "psql-bernstein",
                                                  "ucbql", "rlsvi",         "staged-randql",
                                                  "random", "oracle"};
  return kNames;
}

bool is_agent_name(std::string_view name) {
  const auto& names = agent_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::unique_ptr<Agent> make_agent(std::string_view name, const AgentConfig& config,
                                  const AgentContext& context, const ValueTables* optimal) {
  if (name == "psql") {
    return std::make_unique<PosteriorSamplingAgent>("psql", TargetRule::kOptimistic, config,
                                                    context);
  }
  if (name == "psql-star") {
    return std::make_unique<PosteriorSamplingAgent>("psql-star", TargetRule::kVanilla, config,
                                                    context);
  }
  if (name == "psql-bernstein") {
    AgentConfig bernstein = config;
    bernstein.variance_mode = VarianceMode::kBernstein;
    return std::make_unique<PosteriorSamplingAgent>("psql-bernstein", TargetRule::kOptimistic,
                                                    bernstein, context);
  }
  if (name == "ucbql") return std::make_unique<UcbqlAgent>(config, context);
  if (name == "rlsvi") return std::make_unique<RlsviAgent>(config, context);
  if (name == "staged-randql") return std::make_unique<StagedRandQlAgent>(config, context);
  if (name == "random") return std::make_unique<RandomAgent>(context, config.seed);
  if (name == "oracle") {
    if (optimal == nullptr) throw ValidationError("the oracle agent needs the optimal values");
    return std::make_unique<OracleAgent>(*optimal, context, config.seed);
  }
  throw ValidationError("unknown agent '" + std::string(name) + "'");
}

}  // namespace psqlab

#include "psqlab/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psqlab/mdp.hpp"

namespace psqlab {

double learning_rate(long n, int horizon) {
  if (n < 1) throw ValidationError("learning_rate requires n >= 1");
  return static_cast<double>(horizon + 1) / static_cast<double>(horizon + n);
}

double update_mean(double q_hat, double z, long n, int horizon) {
  const double alpha = learning_rate(n, horizon);
  return (1.0 - alpha) * q_hat + alpha * z;
}

std::vector<double> alpha_weights(long n, int horizon) {
  if (n < 0) throw ValidationError("alpha_weights requires n >= 0");
  std::vector<double> w(static_cast<std::size_t>(n) + 1);
  // w[i] = a_i * prod_{j=i+1..n} (1 - a_j), with a_0 := 1.
  double tail = 1.0;
  for (long i = n; i >= 1; --i) {
    const double a = learning_rate(i, horizon);
    w[static_cast<std::size_t>(i)] = a * tail;
    tail *= 1.0 - a;
  }
  w[0] = tail;
  return w;
}

GaussianPosterior relbo_posterior(double prior_mean, long prior_count, double sigma_sq, double z,
                                  int horizon) {
  if (prior_count < 0) throw ValidationError("prior_count must be nonnegative");
  if (horizon < 0) throw ValidationError("horizon must be nonnegative");
  const long n = prior_count + 1;
  return {update_mean(prior_mean, z, n, horizon), n, sigma_sq / static_cast<double>(n)};
}

std::string to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::kHoeffding: return "hoeffding";
    case VarianceMode::kTuned: return "tuned";
    case VarianceMode::kBernstein: return "bernstein";
  }
  return "unknown";
}

VarianceMode parse_variance_mode(const std::string& text) {
  if (text == "hoeffding") return VarianceMode::kHoeffding;
  if (text == "tuned") return VarianceMode::kTuned;
  if (text == "bernstein") return VarianceMode::kBernstein;
  throw ValidationError("unknown variance mode '" + text + "'");
}

void bernstein_update(BernsteinAccumulators& acc, double z, double r) {
  const double d = z - r;
  acc.mu += d;
  acc.gamma += d * d;
}

double empirical_variance(const BernsteinAccumulators& acc, long n) {
  if (n < 1) throw ValidationError("empirical_variance requires n >= 1");
  const double mean = acc.mu / static_cast<double>(n);
  return std::max(0.0, acc.gamma / static_cast<double>(n) - mean * mean);
}

double hoeffding_sigma_sq(const VarianceParams& params, int horizon) {
  if (params.sigma_sq > 0.0) return params.sigma_sq;
  const double H = horizon;
  return 64.0 * H * H * H;
}

namespace {

double count_schedule(long n, int horizon, const VarianceParams& params, VarianceMode mode) {
  switch (mode) {
    case VarianceMode::kHoeffding:
      return hoeffding_sigma_sq(params, horizon) / static_cast<double>(n + 1);
    case VarianceMode::kTuned:
      return params.c_tuned * params.v_max * params.v_max /
             static_cast<double>(std::max<long>(1, n));
    case VarianceMode::kBernstein: break;
  }
  throw ValidationError("Bernstein cannot be its own cap schedule");
}

}  // namespace

double variance(long n, int horizon, const VarianceParams& params,
                const BernsteinAccumulators* acc) {
  if (n < 0) throw ValidationError("variance requires n >= 0");
  if (params.mode != VarianceMode::kBernstein) return count_schedule(n, horizon, params, params.mode);
  if (acc == nullptr) throw ValidationError("Bernstein variance needs accumulators");

  const double H = horizon;
  const double n1 = static_cast<double>(n + 1);
  const double b = n >= 1 ? empirical_variance(*acc, n) : 0.0;
  const double data_term = std::sqrt(H / n1 * (b + H) * params.eta);
  const double lower_order =
      std::sqrt(std::pow(H, 7) * params.num_states * params.num_actions * params.eta) *
      params.chi / n1;
  const double sd = params.c_bernstein * (data_term + lower_order);
  const double cap = count_schedule(n, horizon, params, params.bernstein_cap);
  return std::min(sd * sd, cap);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

int compute_J_from_p1(double p1, double delta, int num_states, int num_actions,
                      long total_steps) {
  if (!(p1 > 0.0)) {
    throw ValidationError("J requires p1 = Phi(-1) - delta/H - exp(-4) > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (p1 >= 1.0) return 1;
  const double numerator = std::log(static_cast<double>(num_states) * num_actions *
                                    static_cast<double>(total_steps) / delta);
  const double denominator = -std::log1p(-p1);
  return std::max(1, static_cast<int>(std::ceil(numerator / denominator)));
}

int compute_J(double delta, int num_states, int num_actions, long total_steps, int horizon) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (horizon < 1) throw ValidationError("horizon must be positive");
  const double p1 = standard_normal_cdf(-1.0) - delta / horizon - std::exp(-4.0);
  if (!(p1 > 0.0)) {
    throw ValidationError("J requires p1 = Phi(-1) - delta/H - exp(-4) > 0; delta = " +
                          std::to_string(delta) + " is too large for H = " +
                          std::to_string(horizon));
  }
  return compute_J_from_p1(p1, delta, num_states, num_actions, total_steps);
}

}  // namespace psqlab

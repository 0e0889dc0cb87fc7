#pragma once

#include <string>
#include <vector>

namespace psqlab {

/// (H + 1) / (H + n). The first update (n = 1) always has rate 1.
double learning_rate(long n, int horizon);

/// (1 - a_n) * q_hat + a_n * z, where n is the post-increment visit count.
double update_mean(double q_hat, double z, long n, int horizon);

/// Weights [a_n^0, ..., a_n^n] such that applying `update_mean` n times from
/// an initial value q0 with targets z_1..z_n gives a_n^0 q0 + sum_i a_n^i z_i.
std::vector<double> alpha_weights(long n, int horizon);

struct GaussianPosterior {
  double mean;
  long count;
  double variance;
};

/// Closed-form maximizer of the entropy-regularized ELBO for a Gaussian prior
/// N(prior_mean, sigma_sq / (n - 1)), Gaussian likelihood N(theta,
/// sigma_sq / (H + 1)) and entropy weight H / n. The result is
/// N(mu_n, sigma_sq / n) with mu_n = (1 - a_n) prior_mean + a_n z.
/// `horizon` may be 0, which recovers the plain Bayes update with a_n = 1 / n.
GaussianPosterior relbo_posterior(double prior_mean, long prior_count, double sigma_sq, double z,
                                  int horizon);

enum class VarianceMode {
  kHoeffding,  ///< sigma^2 / (n + 1) with sigma^2 = 64 H^3 unless overridden
  kTuned,      ///< c * v_max^2 / max(1, n)
  kBernstein,  ///< data-dependent, clamped by a count-only schedule
};

std::string to_string(VarianceMode mode);
VarianceMode parse_variance_mode(const std::string& text);

/// Running sums of the bootstrapped next-state value (z - r) for one (h, s, a).
struct BernsteinAccumulators {
  double mu = 0.0;     ///< sum of (z - r)
  double gamma = 0.0;  ///< sum of (z - r)^2
};

void bernstein_update(BernsteinAccumulators& acc, double z, double r);

/// gamma / n - (mu / n)^2, floored at zero. Throws for n < 1.
double empirical_variance(const BernsteinAccumulators& acc, long n);

struct VarianceParams {
  VarianceMode mode = VarianceMode::kTuned;
  /// Hoeffding sigma^2; non-positive selects 64 H^3.
  double sigma_sq = 0.0;
  double c_tuned = 0.02;
  double v_max = 1.0;

  // Bernstein schedule. `bernstein_cap` picks which count-only schedule
  // clamps the data-dependent term.
  double c_bernstein = 1.0;
  VarianceMode bernstein_cap = VarianceMode::kHoeffding;
  double eta = 1.0;  ///< log(S A K H / delta)
  double chi = 1.0;  ///< log(J S A T / delta)
  int num_states = 1;
  int num_actions = 1;
};

double hoeffding_sigma_sq(const VarianceParams& params, int horizon);

/// Posterior variance after n visits. `acc` is required in Bernstein mode and
/// ignored otherwise.
double variance(long n, int horizon, const VarianceParams& params,
                const BernsteinAccumulators* acc = nullptr);

/// Phi(x) for the standard normal.
double standard_normal_cdf(double x);

/// Number of target samples J = ceil(log(S A T / delta) / log(1 / (1 - p1)))
/// with p1 = Phi(-1) - delta / H - exp(-4). Throws when p1 <= 0.
int compute_J(double delta, int num_states, int num_actions, long total_steps, int horizon);

/// Same formula with an explicit p1, exposed for monotonicity checks.
int compute_J_from_p1(double p1, double delta, int num_states, int num_actions, long total_steps);

}  // namespace psqlab

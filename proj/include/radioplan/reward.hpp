#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "radioplan/belief.hpp"

namespace radioplan {

struct DegeneratePosteriorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Information-gain reward parameters: Renyi order alpha (tail sensitivity),
/// discount over the horizon, and an optional action cost term.
struct RewardConfig {
  double alpha = 0.1;
  double discount = 1.0;
  std::function<double(const ParticleBelief&, Action)> action_cost;  // null = zero

  void validate() const {
    if (!(alpha > 0.0) || alpha == 1.0)
      throw std::invalid_argument("RewardConfig: alpha must be > 0 and != 1");
    if (!(discount > 0.0) || discount > 1.0)
      throw std::invalid_argument("RewardConfig: discount must be in (0, 1]");
  }
};

namespace detail {

inline double logsumexp(std::span<const double> terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace detail

/// Renyi divergence between a prior particle set {w_i} and the posterior
/// obtained by reweighting with likelihoods {g_i}:
///   (1/(alpha-1)) * log( sum_i w_i g_i^alpha / (sum_i w_i g_i)^alpha )
/// Both distributions share the particle support, so the divergence is exact
/// on the particle approximation. Log-likelihood inputs keep far-field
/// updates from underflowing. Invariant under positive scaling of g.
inline double renyi_divergence_particle_log(std::span<const double> prior_weights,
                                            std::span<const double> log_likelihoods,
                                            double alpha) {
  if (!(alpha > 0.0) || alpha == 1.0)
    throw std::invalid_argument("renyi_divergence_particle: alpha must be > 0 and != 1");
  const std::size_t n = prior_weights.size();
  if (n == 0 || log_likelihoods.size() != n)
    throw std::invalid_argument("renyi_divergence_particle: size mismatch");
  double wsum = 0.0;
  for (double w : prior_weights) {
    if (w < 0.0) throw std::invalid_argument("renyi_divergence_particle: negative weight");
    wsum += w;
  }
  if (!(wsum > 0.0))
    throw std::invalid_argument("renyi_divergence_particle: zero prior mass");
  const double log_wsum = std::log(wsum);

  std::vector<double> num(n), den(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lw = prior_weights[i] > 0.0
                          ? std::log(prior_weights[i]) - log_wsum
                          : -std::numeric_limits<double>::infinity();
    num[i] = lw + alpha * log_likelihoods[i];
    den[i] = lw + log_likelihoods[i];
  }
  const double log_den = detail::logsumexp(den);
  if (!std::isfinite(log_den))
    throw DegeneratePosteriorError("renyi_divergence_particle: all likelihoods are zero");
  return (detail::logsumexp(num) - alpha * log_den) / (alpha - 1.0);
}

inline double renyi_divergence_particle(std::span<const double> prior_weights,
                                        std::span<const double> likelihoods, double alpha) {
  std::vector<double> log_g(likelihoods.size());
  for (std::size_t i = 0; i < likelihoods.size(); ++i) {
    if (likelihoods[i] < 0.0)
      throw std::invalid_argument("renyi_divergence_particle: negative likelihood");
    log_g[i] = likelihoods[i] > 0.0 ? std::log(likelihoods[i])
                                    : -std::numeric_limits<double>::infinity();
  }
  return renyi_divergence_particle_log(prior_weights, log_g, alpha);
}

/// One-step reward: action cost plus the information gain between the
/// predicted belief (prior weights) and the measurement-updated belief.
inline double step_reward(const ParticleBelief& prior, std::span<const double> likelihoods,
                          Action action, const RewardConfig& cfg) {
  const double cost = cfg.action_cost ? cfg.action_cost(prior, action) : 0.0;
  return cost + renyi_divergence_particle(prior.weights, likelihoods, cfg.alpha);
}

inline double step_reward_log(const ParticleBelief& prior,
                              std::span<const double> log_likelihoods, Action action,
                              const RewardConfig& cfg) {
  const double cost = cfg.action_cost ? cfg.action_cost(prior, action) : 0.0;
  return cost + renyi_divergence_particle_log(prior.weights, log_likelihoods, cfg.alpha);
}

/// sum_{k=1..H} lambda^{k-1} r_k
inline double discounted_sum(std::span<const double> rewards, double lambda) {
  if (!(lambda > 0.0) || lambda > 1.0)
    throw std::invalid_argument("discounted_sum: lambda must be in (0, 1]");
  double total = 0.0;
  double factor = 1.0;
  for (double r : rewards) {
    total += factor * r;
    factor *= lambda;
  }
  return total;
}

}  // namespace radioplan

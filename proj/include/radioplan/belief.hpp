#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "radioplan/world.hpp"

namespace radioplan {

struct DegenerateUpdateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bernoulli filter parameters: per-step survival/birth of the object and
/// the per-pulse detection probability.
struct BernoulliModel {
  double survival = 0.99;
  double birth = 0.01;
  double detection = 0.9;
};

struct FilterConfig {
  BernoulliModel bernoulli;
  double resample_ess_fraction = 0.5;  // resample when ESS < fraction * N
  bool roughening = true;              // post-resample jitter against impoverishment
  double roughening_fraction = 0.01;   // sigma as a fraction of per-axis spread
};

/// Weighted particle approximation of a single object's posterior, paired
/// with a Bernoulli existence probability and the motion model the filter
/// assumes for this object. A belief is a plain value: cloning it for
/// planning rollouts is an explicit copy.
struct ParticleBelief {
  std::vector<ObjectState> particles;
  std::vector<double> weights;
  double existence_prob = 1.0;
  MotionModel model;

  int size() const { return static_cast<int>(particles.size()); }
};

/// Effective sample size 1/sum(w^2) for normalized weights.
inline double effective_sample_size(std::span<const double> weights) {
  double s2 = 0.0;
  for (double w : weights) s2 += w * w;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

inline void normalize_weights(std::vector<double>& weights) {
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (!(sum > 0.0) || !std::isfinite(sum))
    throw DegenerateUpdateError("normalize_weights: weight sum is zero or non-finite");
  for (double& w : weights) w /= sum;
}

/// Systematic (low-variance) resampling: n indices drawn with a single
/// uniform offset u0 in [0, 1/n). Weights must be normalized.
inline std::vector<int> systematic_resample_indices(std::span<const double> weights, int n,
                                                    double u0) {
  if (n <= 0) throw std::invalid_argument("systematic_resample_indices: n must be > 0");
  std::vector<int> idx(static_cast<std::size_t>(n));
  double cum = weights[0];
  int i = 0;
  const int last = static_cast<int>(weights.size()) - 1;
  for (int m = 0; m < n; ++m) {
    const double u = u0 + static_cast<double>(m) / n;
    while (u > cum && i < last) cum += weights[++i];
    idx[m] = i;
  }
  return idx;
}

struct Estimate {
  Vec2 mean{0.0, 0.0};
  Mat2 covariance = Mat2::Zero();
};

/// Weighted mean and covariance of particle positions.
inline Estimate estimate(const ParticleBelief& b) {
  Estimate e;
  for (int i = 0; i < b.size(); ++i) e.mean += b.weights[i] * b.particles[i].position;
  for (int i = 0; i < b.size(); ++i) {
    const Vec2 d = b.particles[i].position - e.mean;
    e.covariance += b.weights[i] * (d * d.transpose());
  }
  return e;
}

inline double trace_position_cov(const ParticleBelief& b) {
  return estimate(b).covariance.trace();
}

namespace detail {

struct AxisSpread {
  double px, py, vx, vy, turn;
};

inline AxisSpread weighted_spread(const ParticleBelief& b) {
  auto moment = [&](auto&& get) {
    double m = 0.0, m2 = 0.0;
    for (int i = 0; i < b.size(); ++i) {
      const double v = get(b.particles[i]);
      m += b.weights[i] * v;
      m2 += b.weights[i] * v * v;
    }
    return std::sqrt(std::max(m2 - m * m, 0.0));
  };
  return {moment([](const ObjectState& s) { return s.position.x(); }),
          moment([](const ObjectState& s) { return s.position.y(); }),
          moment([](const ObjectState& s) { return s.velocity.x(); }),
          moment([](const ObjectState& s) { return s.velocity.y(); }),
          moment([](const ObjectState& s) { return s.turn_rate; })};
}

inline void resample_in_place(ParticleBelief& b, const FilterConfig& cfg, RngStream& rng) {
  const int n = b.size();
  const AxisSpread spread = cfg.roughening ? weighted_spread(b) : AxisSpread{};
  const auto idx = systematic_resample_indices(b.weights, n, rng.uniform(0.0, 1.0 / n));
  std::vector<ObjectState> next(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) next[m] = b.particles[idx[m]];
  b.particles = std::move(next);
  std::fill(b.weights.begin(), b.weights.end(), 1.0 / n);
  if (cfg.roughening) {
    const double f = cfg.roughening_fraction;
    for (auto& p : b.particles) {
      if (spread.px > 0.0) p.position.x() += rng.normal(0.0, f * spread.px);
      if (spread.py > 0.0) p.position.y() += rng.normal(0.0, f * spread.py);
      if (spread.vx > 0.0) p.velocity.x() += rng.normal(0.0, f * spread.vx);
      if (spread.vy > 0.0) p.velocity.y() += rng.normal(0.0, f * spread.vy);
      if (spread.turn > 0.0) p.turn_rate += rng.normal(0.0, f * spread.turn);
    }
  }
}

}  // namespace detail

/// Prediction step: every particle propagated through the belief's motion
/// model over dt; existence evolves as p_b*(1-q) + p_s*q. Weights unchanged.
inline void predict(ParticleBelief& b, double dt, const BernoulliModel& bernoulli,
                    RngStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be > 0");
  MotionModel step_model = b.model;
  step_model.dt = dt;
  for (auto& p : b.particles) p = propagate_object(p, step_model, rng);
  b.existence_prob =
      bernoulli.birth * (1.0 - b.existence_prob) + bernoulli.survival * b.existence_prob;
}

/// Per-particle log-likelihoods of a measurement under the RSSI model.
inline std::vector<double> log_likelihoods(const ParticleBelief& b, double z,
                                           const AgentState& agent, const RssiModel& rssi) {
  std::vector<double> out(static_cast<std::size_t>(b.size()));
  const Vec3 u = agent.position3();
  for (int i = 0; i < b.size(); ++i)
    out[i] = log_measurement_likelihood(z, b.particles[i].position3(), u, rssi);
  return out;
}

/// Detection branch of the Bernoulli update with precomputed per-particle
/// log-likelihoods: w_i <- w_i * g_i (the constant P_d cancels in the
/// normalization), existence snaps to 1 in the clutter-free model, and
/// systematic resampling fires when ESS drops below the configured fraction.
/// Throws DegenerateUpdateError when the posterior has no support.
inline void reweight_with_log_likelihoods(ParticleBelief& b, std::span<const double> log_lik,
                                          const FilterConfig& cfg, RngStream& rng) {
  const int n = b.size();
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    lw[i] = (b.weights[i] > 0.0) ? std::log(b.weights[i]) + log_lik[i]
                                 : -std::numeric_limits<double>::infinity();
    max_term = std::max(max_term, lw[i]);
  }
  if (!std::isfinite(max_term))
    throw DegenerateUpdateError("update: all posterior weights are zero");
  for (int i = 0; i < n; ++i) b.weights[i] = std::exp(lw[i] - max_term);
  normalize_weights(b.weights);
  b.existence_prob = 1.0;
  if (effective_sample_size(b.weights) < cfg.resample_ess_fraction * n)
    detail::resample_in_place(b, cfg, rng);
}

/// Measurement update. A detection multiplies weights by the measurement
/// likelihood; a missed detection leaves relative weights unchanged and
/// lowers existence to q(1-P_d)/(1 - q*P_d).
template <class LogLikFn>
void update(ParticleBelief& b, const std::optional<Measurement>& z, LogLikFn&& log_lik_of,
            const FilterConfig& cfg, RngStream& rng) {
  if (!z.has_value()) {
    const double q = b.existence_prob;
    const double pd = cfg.bernoulli.detection;
    b.existence_prob = q * (1.0 - pd) / (1.0 - q * pd);
    return;
  }
  std::vector<double> log_lik(static_cast<std::size_t>(b.size()));
  for (int i = 0; i < b.size(); ++i) log_lik[i] = log_lik_of(b.particles[i]);
  reweight_with_log_likelihoods(b, log_lik, cfg, rng);
}

inline void update(ParticleBelief& b, const std::optional<Measurement>& z,
                   const AgentState& agent, const RssiModel& rssi, const FilterConfig& cfg,
                   RngStream& rng) {
  const Vec3 u = agent.position3();
  update(
      b, z,
      [&](const ObjectState& s) { return log_measurement_likelihood(z->value, s.position3(), u, rssi); },
      cfg, rng);
}

/// n equally-weighted particles drawn from the belief by systematic
/// resampling (no jitter); the downsampled estimate stays within sampling
/// error of the source. Used to build planning beliefs.
inline ParticleBelief downsample(const ParticleBelief& b, int n, RngStream& rng) {
  if (n <= 0) throw std::invalid_argument("downsample: n must be > 0");
  if (n > b.size()) throw std::invalid_argument("downsample: n exceeds particle count");
  ParticleBelief out;
  out.model = b.model;
  out.existence_prob = b.existence_prob;
  const auto idx = systematic_resample_indices(b.weights, n, rng.uniform(0.0, 1.0 / n));
  out.particles.reserve(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) out.particles.push_back(b.particles[idx[m]]);
  out.weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  return out;
}

}  // namespace radioplan

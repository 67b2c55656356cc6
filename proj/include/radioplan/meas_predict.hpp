#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "radioplan/belief.hpp"

namespace radioplan {

enum class GeneratorKind { Pim, Mc, MexGen };

/// Strategy for generating a future measurement from a predicted belief:
///   Pim    — noiseless measurement of the belief's point estimate;
///   Mc     — one noisy measurement from one belief-sampled state;
///   MexGen — mean of M noisy measurements from M belief-sampled states.
struct MeasurementGenerator {
  GeneratorKind kind = GeneratorKind::MexGen;
  int mexgen_samples = 512;

  void validate() const {
    if (mexgen_samples < 1)
      throw std::invalid_argument("MeasurementGenerator: mexgen_samples must be >= 1");
  }
};

inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::Pim: return "pim";
    case GeneratorKind::Mc: return "mc";
    case GeneratorKind::MexGen: return "mexgen";
  }
  return "?";
}

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "pim") return GeneratorKind::Pim;
  if (s == "mc") return GeneratorKind::Mc;
  if (s == "mexgen") return GeneratorKind::MexGen;
  throw std::invalid_argument("unknown generator '" + s + "' (expected pim|mc|mexgen)");
}

namespace detail {

inline Vec3 weighted_mean_position3(const ParticleBelief& b) {
  Vec3 m = Vec3::Zero();
  for (int i = 0; i < b.size(); ++i) m += b.weights[i] * b.particles[i].position3();
  return m;
}

inline std::vector<double> cumulative_weights(const ParticleBelief& b) {
  std::vector<double> cum(static_cast<std::size_t>(b.size()));
  double c = 0.0;
  for (int i = 0; i < b.size(); ++i) {
    c += b.weights[i];
    cum[i] = c;
  }
  return cum;
}

inline int sample_weight_index(const std::vector<double>& cum, double u) {
  const double target = u * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), target);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(),
                                                   static_cast<std::ptrdiff_t>(cum.size()) - 1));
}

}  // namespace detail

/// Predicted ideal measurement: the noiseless measurement function applied
/// to the belief's weighted mean state. Deterministic; the cheap generator,
/// but blind to multi-modality of the belief.
inline Measurement generate_pim(const ParticleBelief& b, const AgentState& agent,
                                const RssiModel& rssi) {
  if (b.size() == 0) throw std::invalid_argument("generate_pim: empty belief");
  return Measurement{received_power(detail::weighted_mean_position3(b), agent.position3(), rssi)};
}

/// One noisy measurement from one weight-proportionally sampled state.
inline Measurement generate_mc(const ParticleBelief& b, const AgentState& agent,
                               const RssiModel& rssi, RngStream& rng) {
  if (b.size() == 0) throw std::invalid_argument("generate_mc: empty belief");
  const auto cum = detail::cumulative_weights(b);
  const int i = detail::sample_weight_index(cum, rng.uniform());
  return measure(b.particles[i].position3(), agent.position3(), rssi, rng);
}

/// Measurement expectation generation: draw M states from the belief
/// (weight-proportional, no resampling first), take one noisy measurement
/// of each, and return the sample mean in dB.
inline Measurement generate_mexgen(const ParticleBelief& b, const AgentState& agent,
                                   const RssiModel& rssi, int samples, RngStream& rng) {
  if (b.size() == 0) throw std::invalid_argument("generate_mexgen: empty belief");
  if (samples < 1) throw std::invalid_argument("generate_mexgen: samples must be >= 1");
  const auto cum = detail::cumulative_weights(b);
  const Vec3 u = agent.position3();
  const double noise_sd = rssi.noise_var > 0.0 ? std::sqrt(rssi.noise_var) : 0.0;
  double sum = 0.0;
  for (int k = 0; k < samples; ++k) {
    const int i = detail::sample_weight_index(cum, rng.uniform());
    double z = received_power(b.particles[i].position3(), u, rssi);
    if (noise_sd > 0.0) z += rng.normal(0.0, noise_sd);
    sum += z;
  }
  return Measurement{sum / samples};
}

inline Measurement generate(const MeasurementGenerator& gen, const ParticleBelief& b,
                            const AgentState& agent, const RssiModel& rssi, RngStream& rng) {
  switch (gen.kind) {
    case GeneratorKind::Pim: return generate_pim(b, agent, rssi);
    case GeneratorKind::Mc: return generate_mc(b, agent, rssi, rng);
    case GeneratorKind::MexGen:
      return generate_mexgen(b, agent, rssi, gen.mexgen_samples, rng);
  }
  throw std::logic_error("generate: unreachable");
}

struct MeasurementMoments {
  double mean = 0.0;      // dB
  double variance = 0.0;  // dB^2
};

/// Exact first two moments of the predicted measurement density — the
/// Gaussian mixture sum_i w_i N(z; h(x_i), R):
///   mean = sum_i w_i h(x_i)
///   var  = sum_i w_i (h(x_i)^2 + R) - mean^2
inline MeasurementMoments predicted_measurement_moments(const ParticleBelief& b,
                                                        const AgentState& agent,
                                                        const RssiModel& rssi) {
  if (b.size() == 0)
    throw std::invalid_argument("predicted_measurement_moments: empty belief");
  const Vec3 u = agent.position3();
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < b.size(); ++i) {
    const double h = received_power(b.particles[i].position3(), u, rssi);
    m1 += b.weights[i] * h;
    m2 += b.weights[i] * (h * h + rssi.noise_var);
  }
  return MeasurementMoments{m1, m2 - m1 * m1};
}

}  // namespace radioplan

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "radioplan/rng.hpp"

namespace radioplan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// ---------------------------------------------------------------------------
// Object and agent kinematics
// ---------------------------------------------------------------------------

/// Motion mode indices for the IMM (CV-IFT) model.
enum ObjectMode : int { kModeStraight = 0, kModeTurnLeft = 1, kModeTurnRight = 2 };

struct ObjectState {
  Vec2 position{0.0, 0.0};   // m, ground plane
  Vec2 velocity{0.0, 0.0};   // m/s
  double turn_rate = 0.0;    // rad/s, magnitude; sign comes from mode
  int mode = kModeStraight;  // 0=CV, 1=turn-left, 2=turn-right
  double altitude = 0.0;     // m, fixed per scenario

  double speed() const { return velocity.norm(); }
  Vec3 position3() const { return {position.x(), position.y(), altitude}; }
};

struct AgentState {
  Vec2 position{0.0, 0.0};
  double altitude = 50.0;  // m, constant over a mission
  Vec2 velocity{0.0, 0.0};
  double commanded_heading = 0.0;  // rad

  Vec3 position3() const { return {position.x(), position.y(), altitude}; }
};

struct AgentLimits {
  double max_speed = 15.0;  // m/s
  double max_accel = 4.0;   // m/s^2
};

enum class MotionKind { RandomWalk, ConstantVelocity, CvIft };

/// Object motion model. process_noise is a per-axis standard deviation,
/// applied per step: to position for RandomWalk (m), to velocity for
/// CV / CV-IFT (m/s).
struct MotionModel {
  MotionKind kind = MotionKind::ConstantVelocity;
  double process_noise = 0.0;
  Mat3 imm_transition = Mat3::Identity();  // row-stochastic, CV-IFT only
  double dt = 1.0;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("MotionModel: dt must be > 0");
    if (process_noise < 0.0) throw std::invalid_argument("MotionModel: negative process noise");
    if (kind == MotionKind::CvIft) {
      for (int r = 0; r < 3; ++r) {
        double sum = imm_transition.row(r).sum();
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument("MotionModel: imm_transition row does not sum to 1");
        if ((imm_transition.row(r).array() < 0.0).any())
          throw std::invalid_argument("MotionModel: imm_transition has negative entry");
      }
    }
  }
};

/// Agent headings: eight cardinal/intercardinal directions, 45 deg apart,
/// index i maps to heading i*45 deg with 0 = +x (east), CCW positive.
enum class Action : int {
  East = 0,
  NorthEast = 1,
  North = 2,
  NorthWest = 3,
  West = 4,
  SouthWest = 5,
  South = 6,
  SouthEast = 7,
};

inline constexpr int kNumActions = 8;

inline double heading_of(Action a) {
  return static_cast<int>(a) * (std::numbers::pi / 4.0);
}

inline Action action_from_index(int i) {
  if (i < 0 || i >= kNumActions) throw std::invalid_argument("action index out of range");
  return static_cast<Action>(i);
}

namespace detail {

inline int sample_row_transition(const Mat3& transition, int mode, RngStream& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (int j = 0; j < 3; ++j) {
    c += transition(mode, j);
    if (u < c) return j;
  }
  return 2;
}

// Constant-speed coordinated turn over dt: velocity rotated by theta,
// position advanced along the exact circular arc.
inline void coordinated_turn(ObjectState& s, double omega, double dt) {
  if (std::abs(omega) < 1e-12) {
    s.position += s.velocity * dt;
    return;
  }
  const double theta = omega * dt;
  const double st = std::sin(theta);
  const double ct = std::cos(theta);
  const Vec2 v = s.velocity;
  s.position.x() += (st * v.x() - (1.0 - ct) * v.y()) / omega;
  s.position.y() += ((1.0 - ct) * v.x() + st * v.y()) / omega;
  s.velocity = Vec2(ct * v.x() - st * v.y(), st * v.x() + ct * v.y());
}

}  // namespace detail

/// Advance one object by model.dt. CV-IFT first samples a mode transition,
/// then applies the selected mode's kinematics. Process noise is additive
/// zero-mean Gaussian per axis (position for RW, velocity otherwise).
inline ObjectState propagate_object(const ObjectState& state, const MotionModel& model,
                                    RngStream& rng) {
  if (!(model.dt > 0.0)) throw std::invalid_argument("propagate_object: dt must be > 0");
  ObjectState out = state;
  switch (model.kind) {
    case MotionKind::RandomWalk: {
      if (model.process_noise > 0.0) {
        out.position.x() += rng.normal(0.0, model.process_noise);
        out.position.y() += rng.normal(0.0, model.process_noise);
      }
      break;
    }
    case MotionKind::ConstantVelocity: {
      out.position += out.velocity * model.dt;
      if (model.process_noise > 0.0) {
        out.velocity.x() += rng.normal(0.0, model.process_noise);
        out.velocity.y() += rng.normal(0.0, model.process_noise);
      }
      break;
    }
    case MotionKind::CvIft: {
      if (state.mode < 0 || state.mode > 2)
        throw std::invalid_argument("propagate_object: invalid motion mode index");
      out.mode = detail::sample_row_transition(model.imm_transition, state.mode, rng);
      if (out.mode == kModeStraight) {
        out.position += out.velocity * model.dt;
      } else {
        const double omega = (out.mode == kModeTurnLeft) ? out.turn_rate : -out.turn_rate;
        detail::coordinated_turn(out, omega, model.dt);
      }
      if (model.process_noise > 0.0) {
        out.velocity.x() += rng.normal(0.0, model.process_noise);
        out.velocity.y() += rng.normal(0.0, model.process_noise);
      }
      break;
    }
  }
  return out;
}

/// Advance the agent by dt toward the commanded heading. The velocity moves
/// toward max_speed in the commanded direction at most max_accel; position
/// uses the trapezoid rule, split at the instant the target velocity is
/// reached so the piecewise-linear velocity profile integrates exactly.
/// Deterministic.
inline AgentState propagate_agent(const AgentState& state, Action action, double dt,
                                  const AgentLimits& limits = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_agent: dt must be > 0");
  AgentState out = state;
  out.commanded_heading = heading_of(action);
  const Vec2 v_target{limits.max_speed * std::cos(out.commanded_heading),
                      limits.max_speed * std::sin(out.commanded_heading)};
  const Vec2 dv = v_target - state.velocity;
  const double gap = dv.norm();
  const double t_reach = gap / limits.max_accel;
  if (t_reach <= dt) {
    out.position += 0.5 * (state.velocity + v_target) * t_reach + v_target * (dt - t_reach);
    out.velocity = v_target;
  } else {
    out.velocity = state.velocity + (limits.max_accel * dt / gap) * dv;
    out.position += 0.5 * (state.velocity + out.velocity) * dt;
  }
  const double speed = out.velocity.norm();
  if (speed > limits.max_speed) out.velocity *= limits.max_speed / speed;
  return out;
}

inline AgentState propagate_agent(const AgentState& state, double heading_rad, double dt,
                                  const AgentLimits& limits = {}) {
  // Nearest of the 8 admissible headings; used only by tests/demos.
  const double step = std::numbers::pi / 4.0;
  int idx = static_cast<int>(std::lround(heading_rad / step)) % kNumActions;
  if (idx < 0) idx += kNumActions;
  return propagate_agent(state, static_cast<Action>(idx), dt, limits);
}

// ---------------------------------------------------------------------------
// RSSI measurement model
// ---------------------------------------------------------------------------

struct Measurement {
  double value = 0.0;    // dB
  int source_id = 0;     // frequency channel of the emitting tag
  double timestamp = 0;  // s
};

enum class AntennaPattern { Isotropic, Monopole };

/// Log-distance path-loss model for received power in dB:
///   P(x,u) = p_ref - 10*n*log10(||x-u|| / d0) + g_dir(x,u)
/// with additive N(0, noise_var) measurement noise. Defaults are the field
/// calibration values used throughout the simulations.
struct RssiModel {
  double p_ref = -7.0;      // dB at reference distance
  double d0 = 1.0;          // m
  double path_loss_n = 1.5; // path-loss exponent
  double noise_var = 2.5 * 2.5;  // dB^2
  AntennaPattern antenna = AntennaPattern::Isotropic;
  // Gain (dB) sampled at uniform depression angles from 0 (horizon) to
  // pi/2 (straight down), linearly interpolated. Empty = built-in default.
  std::vector<double> gain_table_db{};

  void validate() const {
    if (!(d0 > 0.0)) throw std::invalid_argument("RssiModel: d0 must be > 0");
    if (noise_var < 0.0) throw std::invalid_argument("RssiModel: negative noise variance");
  }

  static RssiModel monopole() {
    RssiModel m;
    m.antenna = AntennaPattern::Monopole;
    return m;
  }
};

struct SingularGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateLikelihoodError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Vertical monopole approximation: field falls off as cos(depression),
// with a null straight below the antenna, floored at -30 dB.
inline const std::vector<double>& default_monopole_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t;
    const int n = 31;
    for (int i = 0; i < n; ++i) {
      const double depression = (std::numbers::pi / 2.0) * i / (n - 1);
      const double c = std::cos(depression);
      t.push_back(std::max(20.0 * std::log10(std::max(c, 1e-6)), -30.0));
    }
    return t;
  }();
  return table;
}

inline double interp_gain(const std::vector<double>& table, double depression) {
  const double x = std::clamp(depression / (std::numbers::pi / 2.0), 0.0, 1.0) *
                   static_cast<double>(table.size() - 1);
  const int i = std::min(static_cast<int>(x), static_cast<int>(table.size()) - 2);
  const double f = x - i;
  return table[i] * (1.0 - f) + table[i + 1] * f;
}

}  // namespace detail

/// Directional antenna gain in dB for a source seen from the receiver.
/// Elevation-dependent only (azimuth symmetric).
inline double antenna_gain_db(const Vec3& source, const Vec3& receiver, const RssiModel& model) {
  if (model.antenna == AntennaPattern::Isotropic) return 0.0;
  const double dist = (source - receiver).norm();
  if (dist <= 0.0) return 0.0;
  const double depression = std::asin(std::clamp(std::abs(receiver.z() - source.z()) / dist, 0.0, 1.0));
  const auto& table = model.gain_table_db.empty() ? detail::default_monopole_table()
                                                  : model.gain_table_db;
  return detail::interp_gain(table, depression);
}

/// Noiseless received power in dB. Distance is the full 3-D range,
/// including the altitude gap. Throws SingularGeometryError at zero range.
inline double received_power(const Vec3& source, const Vec3& receiver, const RssiModel& model) {
  const double dist = (source - receiver).norm();
  if (!(dist > 0.0)) throw SingularGeometryError("received_power: zero source-receiver distance");
  return model.p_ref - 10.0 * model.path_loss_n * std::log10(dist / model.d0) +
         antenna_gain_db(source, receiver, model);
}

/// One noisy RSSI detection: received_power plus N(0, noise_var).
inline Measurement measure(const Vec3& source, const Vec3& receiver, const RssiModel& model,
                           RngStream& rng, int source_id = 0, double timestamp = 0.0) {
  double value = received_power(source, receiver, model);
  if (model.noise_var > 0.0) value += rng.normal(0.0, std::sqrt(model.noise_var));
  return Measurement{value, source_id, timestamp};
}

inline double log_measurement_likelihood(double z, const Vec3& source, const Vec3& receiver,
                                         const RssiModel& model) {
  if (!(model.noise_var > 0.0))
    throw DegenerateLikelihoodError("measurement_likelihood: noise_var must be > 0");
  const double mu = received_power(source, receiver, model);
  const double d = z - mu;
  return -0.5 * d * d / model.noise_var -
         0.5 * std::log(2.0 * std::numbers::pi * model.noise_var);
}

/// Gaussian density of z around the noiseless received power.
inline double measurement_likelihood(double z, const Vec3& source, const Vec3& receiver,
                                     const RssiModel& model) {
  return std::exp(log_measurement_likelihood(z, source, receiver, model));
}

}  // namespace radioplan

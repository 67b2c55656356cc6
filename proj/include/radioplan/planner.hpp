#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "radioplan/meas_predict.hpp"
#include "radioplan/reward.hpp"

namespace radioplan {

enum class RolloutPolicy { ConstantAction, Enumerate };

struct PlannerConfig {
  double replan_period = 5.0;  // s between decisions
  double lookahead = 10.0;     // s simulated per rollout
  double rollout_dt = 1.0;     // s per rollout step
  int mc_repeats = 8;          // rollouts per sequence, MC generator only
  RolloutPolicy policy = RolloutPolicy::ConstantAction;
  int enumerate_depth = 1;     // action-sequence depth for Enumerate
  int planning_particles = 1000;

  int horizon_steps() const { return static_cast<int>(std::llround(lookahead / rollout_dt)); }

  void validate() const {
    if (!(rollout_dt > 0.0)) throw std::invalid_argument("PlannerConfig: rollout_dt must be > 0");
    if (lookahead < replan_period)
      throw std::invalid_argument("PlannerConfig: lookahead must be >= replan_period");
    const double steps = lookahead / rollout_dt;
    if (std::abs(steps - std::llround(steps)) > 1e-9)
      throw std::invalid_argument("PlannerConfig: rollout_dt must divide lookahead");
    if (mc_repeats < 1) throw std::invalid_argument("PlannerConfig: mc_repeats must be >= 1");
    if (planning_particles < 1)
      throw std::invalid_argument("PlannerConfig: planning_particles must be >= 1");
    if (policy == RolloutPolicy::Enumerate && (enumerate_depth < 1 || enumerate_depth > 5))
      throw std::invalid_argument("PlannerConfig: enumerate_depth must be in [1, 5]");
  }
};

/// Per-stage wall time of one rollout, nanoseconds (monotonic clock).
struct StageTimings {
  std::int64_t predict_ns = 0;
  std::int64_t measure_ns = 0;
  std::int64_t update_ns = 0;
  std::int64_t reward_ns = 0;
};

struct RolloutTrace {
  std::vector<Action> actions;
  std::vector<double> rewards;
  StageTimings timings;
  double discounted_total = 0.0;
  bool degenerate_abort = false;  // update degenerated; partial reward kept
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline std::int64_t ns_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
}

}  // namespace detail

/// Simulate one candidate action sequence from a cloned planning belief.
/// Each step: (1) predict the belief and propagate the agent, (2) generate a
/// measurement from the predicted belief, (3) update the belief with it,
/// (4) score the information gain. Stage wall times are accumulated per
/// trace. dyn_rng drives process noise and resampling; gen_rng drives the
/// measurement generator.
inline RolloutTrace rollout(ParticleBelief belief, AgentState agent,
                            std::span<const Action> actions, const MeasurementGenerator& gen,
                            const RssiModel& rssi, const RewardConfig& rcfg,
                            const FilterConfig& fcfg, const PlannerConfig& pcfg,
                            RngStream& dyn_rng, RngStream& gen_rng) {
  RolloutTrace trace;
  trace.actions.assign(actions.begin(), actions.end());
  trace.rewards.reserve(actions.size());
  for (Action a : actions) {
    auto t0 = detail::Clock::now();
    predict(belief, pcfg.rollout_dt, fcfg.bernoulli, dyn_rng);
    agent = propagate_agent(agent, a, pcfg.rollout_dt);
    auto t1 = detail::Clock::now();
    trace.timings.predict_ns += detail::ns_between(t0, t1);

    Measurement z;
    try {
      z = generate(gen, belief, agent, rssi, gen_rng);
    } catch (const SingularGeometryError&) {
      trace.degenerate_abort = true;
      break;
    }
    auto t2 = detail::Clock::now();
    trace.timings.measure_ns += detail::ns_between(t1, t2);

    std::vector<double> log_lik = log_likelihoods(belief, z.value, agent, rssi);
    auto t3 = detail::Clock::now();
    trace.timings.update_ns += detail::ns_between(t2, t3);

    double r;
    try {
      r = step_reward_log(belief, log_lik, a, rcfg);
    } catch (const DegeneratePosteriorError&) {
      trace.degenerate_abort = true;
      break;
    }
    auto t4 = detail::Clock::now();
    trace.timings.reward_ns += detail::ns_between(t3, t4);

    try {
      reweight_with_log_likelihoods(belief, log_lik, fcfg, dyn_rng);
    } catch (const DegenerateUpdateError&) {
      trace.degenerate_abort = true;
      break;
    }
    auto t5 = detail::Clock::now();
    trace.timings.update_ns += detail::ns_between(t4, t5);

    trace.rewards.push_back(r);
  }
  trace.discounted_total = discounted_sum(trace.rewards, rcfg.discount);
  return trace;
}

struct PlanningResult {
  Action best = Action::East;
  std::array<double, kNumActions> action_values{};  // mean discounted sum per first action
  std::vector<RolloutTrace> traces;
  int rollouts_executed = 0;
};

namespace detail {

inline std::vector<std::vector<Action>> candidate_sequences(const PlannerConfig& cfg) {
  const int h = cfg.horizon_steps();
  std::vector<std::vector<Action>> seqs;
  if (cfg.policy == RolloutPolicy::ConstantAction) {
    for (int a = 0; a < kNumActions; ++a)
      seqs.emplace_back(static_cast<std::size_t>(h), static_cast<Action>(a));
    return seqs;
  }
  // Enumerate: all sequences of the first `depth` steps, last action held
  // to the end of the horizon.
  const int depth = std::min(cfg.enumerate_depth, h);
  std::size_t count = 1;
  for (int d = 0; d < depth; ++d) count *= kNumActions;
  seqs.reserve(count);
  for (std::size_t code = 0; code < count; ++code) {
    std::vector<Action> seq(static_cast<std::size_t>(h));
    std::size_t c = code;
    for (int d = 0; d < depth; ++d) {
      seq[static_cast<std::size_t>(d)] = static_cast<Action>(c % kNumActions);
      c /= kNumActions;
    }
    for (int k = depth; k < h; ++k) seq[static_cast<std::size_t>(k)] = seq[depth - 1];
    seqs.push_back(std::move(seq));
  }
  return seqs;
}

}  // namespace detail

/// One planning decision: evaluate every candidate first action by simulated
/// rollouts and return the argmax of the mean discounted reward (ties break
/// to the lowest heading index). PIM and MexGen run one rollout per
/// sequence; MC averages mc_repeats rollouts. The belief is downsampled to
/// planning_particles when larger. Each rollout gets independent substreams
/// derived up front, so evaluation order cannot change the argmax.
inline PlanningResult plan_action(const ParticleBelief& belief, const AgentState& agent,
                                  const MeasurementGenerator& gen, const RssiModel& rssi,
                                  const RewardConfig& rcfg, const FilterConfig& fcfg,
                                  const PlannerConfig& pcfg, RngStream& plan_rng,
                                  RngStream& gen_rng) {
  pcfg.validate();
  rcfg.validate();
  gen.validate();

  ParticleBelief planning_belief =
      belief.size() > pcfg.planning_particles
          ? downsample(belief, pcfg.planning_particles, plan_rng)
          : belief;

  const auto sequences = detail::candidate_sequences(pcfg);
  const int repeats = gen.kind == GeneratorKind::Mc ? pcfg.mc_repeats : 1;
  const std::uint64_t dyn_base = plan_rng.next_u64();
  const std::uint64_t gen_base = gen_rng.next_u64();

  PlanningResult result;
  std::array<double, kNumActions> sums{};
  std::array<int, kNumActions> counts{};
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const int first = static_cast<int>(sequences[s].front());
    for (int rep = 0; rep < repeats; ++rep) {
      const std::uint64_t salt = static_cast<std::uint64_t>(s) * 1024u + static_cast<std::uint64_t>(rep);
      RngStream dyn(derive_seed(dyn_base, salt));
      RngStream gnr(derive_seed(gen_base, salt));
      RolloutTrace trace = rollout(planning_belief, agent, sequences[s], gen, rssi, rcfg,
                                   fcfg, pcfg, dyn, gnr);
      sums[first] += trace.discounted_total;
      counts[first] += 1;
      result.rollouts_executed += 1;
      result.traces.push_back(std::move(trace));
    }
  }
  for (int a = 0; a < kNumActions; ++a)
    result.action_values[a] = counts[a] > 0 ? sums[a] / counts[a] : 0.0;

  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (result.action_values[a] > result.action_values[best]) best = a;
  result.best = static_cast<Action>(best);
  return result;
}

inline Action select_action(const ParticleBelief& belief, const AgentState& agent,
                            const MeasurementGenerator& gen, const RssiModel& rssi,
                            const RewardConfig& rcfg, const FilterConfig& fcfg,
                            const PlannerConfig& pcfg, RngStream& plan_rng,
                            RngStream& gen_rng) {
  return plan_action(belief, agent, gen, rssi, rcfg, fcfg, pcfg, plan_rng, gen_rng).best;
}

struct StageMedians {
  double predict_ns = 0.0;
  double measure_ns = 0.0;
  double update_ns = 0.0;
  double reward_ns = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
  return 0.5 * (hi + v[mid - 1]);
}

}  // namespace detail

/// Median wall time per planning stage across rollout traces.
inline StageMedians stage_timing_report(std::span<const RolloutTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("stage_timing_report: no traces");
  std::vector<double> p, m, u, r;
  p.reserve(traces.size());
  m.reserve(traces.size());
  u.reserve(traces.size());
  r.reserve(traces.size());
  for (const auto& t : traces) {
    p.push_back(static_cast<double>(t.timings.predict_ns));
    m.push_back(static_cast<double>(t.timings.measure_ns));
    u.push_back(static_cast<double>(t.timings.update_ns));
    r.push_back(static_cast<double>(t.timings.reward_ns));
  }
  return StageMedians{detail::median(std::move(p)), detail::median(std::move(m)),
                      detail::median(std::move(u)), detail::median(std::move(r))};
}

}  // namespace radioplan

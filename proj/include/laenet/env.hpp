#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "laenet/arpo.hpp"
#include "laenet/channel.hpp"
#include "laenet/rewards.hpp"
#include "laenet/rng.hpp"
#include "laenet/scenario.hpp"

namespace laenet {

struct Action {
  double dx_m = 0.0, dy_m = 0.0, dz_m = 0.0;
};

struct EnvState {
  Vec3 uav_pos;
  std::vector<Vec3> rel_pos;  // uav - user, per user
  std::vector<std::int64_t> res_per_user;
  std::vector<double> power_per_user;
  std::vector<double> gain_per_user;
  std::vector<double> backlog_bits;
  int slot_index = 0;
};

struct StepOutcome {
  EnvState next_state;
  std::vector<double> transmitted_bits;
  std::vector<double> rate_bps;
  bool done = false;
  double elapsed_time_s = 0.0;
  RewardContext ctx;  // features for reward evaluation at this slot
};

struct Waypoint {
  double x = 0.0, y = 0.0, z = 0.0;
  double t_s = 0.0;
};

struct EpisodeLog {
  std::vector<Waypoint> waypoints;  // length T+1 (includes start)
  std::vector<std::vector<double>> rates;     // [slot][user]
  std::vector<std::vector<double>> backlogs;  // after each slot
  std::vector<double> rewards;                // filled by the caller's reward fn
  std::vector<std::optional<double>> completion_time_s;  // fractional uplink finish
  std::vector<double> latency_s;  // T_n^total
  double max_latency_s = 0.0;
  bool all_completed = false;
  double elapsed_s = 0.0;
};

// Rescale the horizontal component to the speed circle (direction kept),
// clip the vertical component, then shrink it to stay inside the altitude
// band.
inline Action clamp_action(const Action& raw, const PhysConfig& phys, double current_z) {
  Action a = raw;
  const double max_xy = phys.slot_len_s * phys.v_xy_max_mps;
  const double norm_xy = std::sqrt(a.dx_m * a.dx_m + a.dy_m * a.dy_m);
  if (norm_xy > max_xy) {
    const double s = max_xy / norm_xy;
    a.dx_m *= s;
    a.dy_m *= s;
  }
  const double max_z = phys.slot_len_s * phys.v_z_max_mps;
  a.dz_m = std::clamp(a.dz_m, -max_z, max_z);
  a.dz_m = std::clamp(a.dz_m, phys.h_min_m - current_z, phys.h_max_m - current_z);
  return a;
}

// Slotted MDP around a fixed ARPO allocation: the policy moves the UAV,
// the channel follows, backlogs drain at the achievable rates.
class Env {
 public:
  Env(Scenario scenario, ArpoSolution solution, std::uint64_t seed)
      : sc_(std::move(scenario)), sol_(std::move(solution)), rng_(seed, "fading") {
    if (sol_.res_per_user.size() != sc_.users.size() ||
        sol_.power_per_user.size() != sc_.users.size())
      throw std::invalid_argument("ARPO solution does not match scenario users");
    reset();
  }

  const Scenario& scenario() const { return sc_; }
  const ArpoSolution& solution() const { return sol_; }
  const EnvState& state() const { return state_; }
  const std::vector<double>& initial_backlogs() const { return initial_backlogs_; }

  EnvState reset() { return reset(sc_.uav_start); }

  EnvState reset(const Vec3& start_pos) {
    state_ = EnvState{};
    state_.uav_pos = start_pos;
    state_.res_per_user = sol_.res_per_user;
    state_.power_per_user = sol_.power_per_user;
    const std::size_t n_users = sc_.users.size();
    state_.rel_pos.resize(n_users);
    state_.gain_per_user.resize(n_users);
    state_.backlog_bits.resize(n_users);
    for (std::size_t n = 0; n < n_users; ++n) {
      state_.rel_pos[n] = state_.uav_pos - sc_.users[n].pos_m;
      state_.gain_per_user[n] =
          sample_channel(state_.uav_pos, sc_.users[n].pos_m, sc_.chan, rng_).gain;
      state_.backlog_bits[n] =
          sc_.profile.payload_bits(sol_.res_per_user[n], sc_.users[n].n_queries);
    }
    initial_backlogs_ = state_.backlog_bits;
    completion_time_s_.assign(n_users, std::nullopt);
    done_ = false;
    for (std::size_t n = 0; n < n_users; ++n)
      if (state_.backlog_bits[n] == 0.0) completion_time_s_[n] = 0.0;
    return state_;
  }

  bool done() const { return done_; }

  StepOutcome step(const Action& raw_action) {
    if (done_) throw std::logic_error("step() on a finished episode");
    const std::size_t n_users = sc_.users.size();
    const double alpha = sc_.phys.slot_len_s;
    const int t = state_.slot_index;

    StepOutcome out;
    out.ctx.backlog = state_.backlog_bits;
    out.ctx.slot_len_s = alpha;
    out.ctx.slot = t;
    out.ctx.uav_pos = state_.uav_pos;
    for (const auto& u : sc_.users) out.ctx.user_pos.push_back(u.pos_m);

    const Action a = clamp_action(raw_action, sc_.phys, state_.uav_pos.z);
    EnvState next = state_;
    next.uav_pos = {state_.uav_pos.x + a.dx_m, state_.uav_pos.y + a.dy_m,
                    state_.uav_pos.z + a.dz_m};
    next.slot_index = t + 1;

    out.transmitted_bits.resize(n_users);
    out.rate_bps.resize(n_users);
    for (std::size_t n = 0; n < n_users; ++n) {
      next.rel_pos[n] = next.uav_pos - sc_.users[n].pos_m;
      // Transmission happens during the slot at the post-move pose.
      next.gain_per_user[n] =
          sample_channel(next.uav_pos, sc_.users[n].pos_m, sc_.chan, rng_).gain;
      const double r = rate_bps(sc_.users[n].bandwidth_hz,
                                snr(state_.power_per_user[n], next.gain_per_user[n],
                                    sc_.chan.noise_w()));
      out.rate_bps[n] = r;
      const double sent = std::min(state_.backlog_bits[n], alpha * r);
      out.transmitted_bits[n] = sent;
      next.backlog_bits[n] = state_.backlog_bits[n] - sent;
      if (state_.backlog_bits[n] > 0.0 && next.backlog_bits[n] <= 0.0) {
        next.backlog_bits[n] = 0.0;
        completion_time_s_[n] = alpha * t + state_.backlog_bits[n] / r;
      }
    }

    out.ctx.transmitted = out.transmitted_bits;
    out.ctx.next_backlog = next.backlog_bits;
    out.ctx.rate = out.rate_bps;
    out.ctx.uav_pos_next = next.uav_pos;

    const bool cleared = std::all_of(next.backlog_bits.begin(), next.backlog_bits.end(),
                                     [](double b) { return b == 0.0; });
    done_ = cleared || next.slot_index >= sc_.phys.horizon_slots;
    out.done = done_;
    double elapsed = alpha * next.slot_index;
    if (cleared) {
      elapsed = 0.0;
      for (const auto& c : completion_time_s_)
        elapsed = std::max(elapsed, c.value_or(0.0));
    }
    out.elapsed_time_s = elapsed;
    state_ = std::move(next);
    out.next_state = state_;
    return out;
  }

  const std::vector<std::optional<double>>& completion_times() const {
    return completion_time_s_;
  }

  // Normalized observation for learning (7N features): relative positions,
  // resolutions, powers, log-scaled gains, backlog fractions.
  std::vector<double> observe() const { return observe(state_); }

  std::vector<double> observe(const EnvState& st) const {
    std::vector<double> obs;
    const std::size_t n_users = sc_.users.size();
    obs.reserve(7 * n_users);
    const double pos_scale = 2.0 * sc_.phys.area_half_m;
    const double max_pixels =
        static_cast<double>(sc_.profile.entries().back().pixels);
    for (std::size_t n = 0; n < n_users; ++n) {
      obs.push_back(st.rel_pos[n].x / pos_scale);
      obs.push_back(st.rel_pos[n].y / pos_scale);
      obs.push_back(st.rel_pos[n].z / pos_scale);
    }
    for (std::size_t n = 0; n < n_users; ++n)
      obs.push_back(static_cast<double>(st.res_per_user[n]) / max_pixels);
    for (std::size_t n = 0; n < n_users; ++n)
      obs.push_back(st.power_per_user[n] / sc_.users[n].p_max_w);
    for (std::size_t n = 0; n < n_users; ++n)
      obs.push_back((std::log10(st.gain_per_user[n]) + 12.0) / 4.0);
    for (std::size_t n = 0; n < n_users; ++n)
      obs.push_back(initial_backlogs_[n] > 0.0 ? st.backlog_bits[n] / initial_backlogs_[n]
                                               : 0.0);
    return obs;
  }

  std::size_t obs_dim() const { return 7 * sc_.users.size(); }

 private:
  Scenario sc_;
  ArpoSolution sol_;
  RngStream rng_;
  EnvState state_;
  std::vector<double> initial_backlogs_;
  std::vector<std::optional<double>> completion_time_s_;
  bool done_ = false;
};

struct EpisodeLatency {
  std::vector<double> per_user_s;
  double max_s = 0.0;
  bool all_completed = true;
};

inline constexpr double kIncompletionPenaltyS = 1.0;

// T_n^total for a finished episode. Users still uploading at the horizon
// are charged the full horizon plus a fixed penalty.
inline EpisodeLatency episode_latency(const Env& env,
                                      double incompletion_penalty_s = kIncompletionPenaltyS) {
  const auto& sc = env.scenario();
  const auto& sol = env.solution();
  EpisodeLatency lat;
  for (std::size_t n = 0; n < sc.users.size(); ++n) {
    const double gamma =
        sc.profile.proc_time_s(sol.res_per_user[n], sc.expected_out_tokens) + sc.t_down_s;
    const auto& c = env.completion_times()[n];
    double total;
    if (c.has_value()) {
      total = *c + gamma;
    } else {
      total = sc.phys.slot_len_s * sc.phys.horizon_slots + gamma + incompletion_penalty_s;
      lat.all_completed = false;
    }
    lat.per_user_s.push_back(total);
    lat.max_s = std::max(lat.max_s, total);
  }
  return lat;
}

using Policy = std::function<Action(const EnvState&)>;

// Roll one episode from the given start pose; rewards are left empty for
// the caller unless a reward callback is supplied.
inline EpisodeLog run_episode(Env& env, const Policy& policy, const Vec3& start_pos,
                              const std::function<double(const RewardContext&)>& reward = {}) {
  env.reset(start_pos);
  EpisodeLog log;
  const auto& sc = env.scenario();
  log.waypoints.push_back({start_pos.x, start_pos.y, start_pos.z, 0.0});
  while (!env.done()) {
    const Action a = policy(env.state());
    StepOutcome out = env.step(a);
    const auto& p = out.next_state.uav_pos;
    log.waypoints.push_back({p.x, p.y, p.z, sc.phys.slot_len_s * out.next_state.slot_index});
    log.rates.push_back(out.rate_bps);
    log.backlogs.push_back(out.next_state.backlog_bits);
    if (reward) log.rewards.push_back(reward(out.ctx));
    log.elapsed_s = out.elapsed_time_s;
  }
  const EpisodeLatency lat = episode_latency(env);
  log.completion_time_s.assign(env.completion_times().begin(), env.completion_times().end());
  log.latency_s = lat.per_user_s;
  log.max_latency_s = lat.max_s;
  log.all_completed = lat.all_completed;
  return log;
}

inline EpisodeLog run_episode(Env& env, const Policy& policy) {
  return run_episode(env, policy, env.scenario().uav_start);
}

// Multi-batch mission: each batch's episode starts where the previous one
// ended; waypoint times carry a global offset.
inline std::vector<EpisodeLog> run_batches(const std::vector<Scenario>& batches,
                                           const Policy& policy, std::uint64_t seed) {
  std::vector<EpisodeLog> logs;
  Vec3 pos;
  double t_offset = 0.0;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const Scenario& sc = batches[k];
    Env env(sc, arpo_solve(make_instance(sc, k == 0 ? sc.uav_start : pos)),
            seed + static_cast<std::uint64_t>(k));
    EpisodeLog log = run_episode(env, policy, k == 0 ? sc.uav_start : pos);
    const Waypoint& last = log.waypoints.back();
    pos = {last.x, last.y, last.z};
    for (auto& w : log.waypoints) w.t_s += t_offset;
    t_offset = log.waypoints.back().t_s;
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace laenet

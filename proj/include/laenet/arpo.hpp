#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "laenet/channel.hpp"
#include "laenet/scenario.hpp"
#include "laenet/uplink.hpp"
#include "laenet/vlm_profile.hpp"

namespace laenet {

// One user's data for the quasi-static power subproblem, with the channel
// frozen at the session-start pose (|h_hat| = 1).
struct ArpoUser {
  int id = 0;
  double acc_min = 0.0;
  int n_queries = 1;
  double bandwidth_hz = 0.0;
  double gain = 0.0;
  double p_max_w = 0.0;
};

struct ArpoInstance {
  std::vector<ArpoUser> users;
  ResolutionProfile profile = default_profile();
  double noise_w = 0.0;
  double zeta = 0.0;
  double proc_tokens = 20.0;  // expected answer length
  double t_down_s = 0.1;

  double payload_bits(std::size_t n, std::int64_t res) const {
    return profile.payload_bits(res, users[n].n_queries);
  }
  // Power-independent latency floor: inference + downlink.
  double gamma_s(std::int64_t res) const {
    return profile.proc_time_s(res, proc_tokens) + t_down_s;
  }
  double user_latency(std::size_t n, std::int64_t res, double p_w) const {
    return static_uplink_time(payload_bits(n, res), users[n].bandwidth_hz, p_w, users[n].gain,
                              noise_w) +
           gamma_s(res);
  }
};

struct ArpoSolution {
  std::vector<std::int64_t> res_per_user;
  std::vector<double> power_per_user;
  std::vector<bool> clamp_flags;  // true where P_n^max binds
  std::vector<double> achieved_latency_s;
  std::vector<double> omega;  // dual weights at tau*, debug only
  double tau_star = 0.0;
  double objective = 0.0;  // achieved max latency + zeta * sum(P)
};

inline ArpoInstance make_instance(const Scenario& sc, const Vec3& uav_pose) {
  ArpoInstance inst;
  inst.profile = sc.profile;
  inst.noise_w = sc.chan.noise_w();
  inst.zeta = sc.zeta;
  inst.proc_tokens = sc.expected_out_tokens;
  inst.t_down_s = sc.t_down_s;
  for (const auto& u : sc.users) {
    ArpoUser a;
    a.id = u.id;
    a.acc_min = u.acc_min;
    a.n_queries = u.n_queries;
    a.bandwidth_hz = u.bandwidth_hz;
    a.gain = mean_gain(geometry(uav_pose, u.pos_m), sc.chan);
    a.p_max_w = u.p_max_w;
    inst.users.push_back(a);
  }
  return inst;
}

inline ArpoInstance make_instance(const Scenario& sc) { return make_instance(sc, sc.uav_start); }

// dT_total/dP magnitude at power p (s/W); strictly decreasing in p.
inline double g_n(double p_w, double payload_bits, double bandwidth_hz, double gain,
                  double noise_w) {
  if (p_w <= 0.0) throw std::domain_error("g_n requires p > 0");
  const double s = gain * p_w / noise_w;
  const double log_term = std::log2(1.0 + s);
  return payload_bits * gain /
         (bandwidth_hz * noise_w * (1.0 + s) * std::numbers::ln2 * log_term * log_term);
}

// Inverse of the latency curve: power that makes T_total exactly tau.
inline double power_for_tau(double tau_s, double payload_bits, double bandwidth_hz, double gain,
                            double noise_w, double gamma_s) {
  if (tau_s <= gamma_s) throw std::domain_error("tau must exceed the latency floor Gamma");
  return noise_w / gain * (std::exp2(payload_bits / (bandwidth_hz * (tau_s - gamma_s))) - 1.0);
}

namespace detail {

// Stationarity residual sum(zeta / g_n(P_n(tau))); strictly decreasing in
// tau, from +inf at the floor down to 0.
inline double stationarity_sum(const ArpoInstance& inst,
                               const std::vector<std::int64_t>& res, double tau) {
  double sum = 0.0;
  for (std::size_t n = 0; n < inst.users.size(); ++n) {
    const double d = inst.payload_bits(n, res[n]);
    if (d == 0.0) continue;  // zero payload: latency is power-independent
    const double gamma = inst.gamma_s(res[n]);
    if (tau <= gamma) return std::numeric_limits<double>::infinity();
    const double p = power_for_tau(tau, d, inst.users[n].bandwidth_hz, inst.users[n].gain,
                                   inst.noise_w, gamma);
    if (!std::isfinite(p)) return std::numeric_limits<double>::infinity();
    sum += inst.zeta / g_n(p, d, inst.users[n].bandwidth_hz, inst.users[n].gain, inst.noise_w);
  }
  return sum;
}

}  // namespace detail

inline constexpr double kTauTol = 1e-9;

// Bisection for the unique tau with sum(zeta/g_n(P_n(tau))) = 1.
inline double solve_tau(const ArpoInstance& inst, const std::vector<std::int64_t>& res) {
  if (inst.zeta <= 0.0) throw std::invalid_argument("solve_tau requires zeta > 0");
  double gamma_max = 0.0;
  for (std::size_t n = 0; n < inst.users.size(); ++n)
    gamma_max = std::max(gamma_max, inst.gamma_s(res[n]));
  double lo = gamma_max + kTauTol;
  double hi = std::max(2.0 * lo, lo + 1.0);
  while (detail::stationarity_sum(inst, res, hi) >= 1.0) hi *= 2.0;
  while (hi - lo > kTauTol) {
    const double mid = 0.5 * (lo + hi);
    if (detail::stationarity_sum(inst, res, mid) >= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Per-user minimal feasible resolutions (the subproblem is separable).
inline std::vector<std::int64_t> scan_resolutions(const ArpoInstance& inst) {
  std::vector<std::int64_t> res;
  res.reserve(inst.users.size());
  for (const auto& u : inst.users) {
    try {
      res.push_back(inst.profile.min_feasible_resolution(u.acc_min));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("user " + std::to_string(u.id) + ": " + e.what());
    }
  }
  return res;
}

inline ArpoSolution solve_powers(const ArpoInstance& inst, const std::vector<std::int64_t>& res);

// B&B over the product resolution space. The power-stage objective is
// non-decreasing in every r_n, so completing a partial assignment with each
// user's minimal feasible choice yields a valid lower bound.
inline std::vector<std::int64_t> select_resolutions(const ArpoInstance& inst) {
  const std::size_t n_users = inst.users.size();
  const auto& rows = inst.profile.entries();
  const std::vector<std::int64_t> minimal = scan_resolutions(inst);

  std::vector<std::int64_t> best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> assign = minimal;

  auto objective_of = [&](const std::vector<std::int64_t>& r) {
    return solve_powers(inst, r).objective;
  };

  auto dfs = [&](auto&& self, std::size_t depth) -> void {
    // Lower bound: remaining users pinned at their minimal choices.
    for (std::size_t k = depth; k < n_users; ++k) assign[k] = minimal[k];
    const double bound = objective_of(assign);
    if (bound >= best_obj) return;
    if (depth == n_users) {
      best_obj = bound;
      best = assign;
      return;
    }
    for (const auto& row : rows) {
      if (row.accuracy < inst.users[depth].acc_min) continue;
      assign[depth] = row.pixels;
      self(self, depth + 1);
    }
    assign[depth] = minimal[depth];
  };
  dfs(dfs, 0);
  if (best.empty()) throw std::runtime_error("no feasible resolution assignment");
  return best;
}

// Power subproblem for fixed resolutions (KKT + bisection).
inline ArpoSolution solve_powers(const ArpoInstance& inst, const std::vector<std::int64_t>& res) {
  const std::size_t n_users = inst.users.size();
  ArpoSolution sol;
  sol.res_per_user = res;
  sol.power_per_user.resize(n_users);
  sol.clamp_flags.assign(n_users, false);
  sol.achieved_latency_s.resize(n_users);
  sol.omega.assign(n_users, 0.0);

  if (inst.zeta == 0.0) {
    for (std::size_t n = 0; n < n_users; ++n) sol.power_per_user[n] = inst.users[n].p_max_w;
  } else {
    const double tau = solve_tau(inst, res);
    sol.tau_star = tau;
    for (std::size_t n = 0; n < n_users; ++n) {
      const double d = inst.payload_bits(n, res[n]);
      double p_tau = std::numeric_limits<double>::infinity();
      if (d > 0.0 && tau > inst.gamma_s(res[n]))
        p_tau = power_for_tau(tau, d, inst.users[n].bandwidth_hz, inst.users[n].gain,
                              inst.noise_w, inst.gamma_s(res[n]));
      if (d == 0.0) p_tau = 0.0;  // no upload, any power works; spend none
      sol.power_per_user[n] = std::min(p_tau, inst.users[n].p_max_w);
      sol.clamp_flags[n] = p_tau > inst.users[n].p_max_w;
      if (d > 0.0 && sol.power_per_user[n] > 0.0)
        sol.omega[n] = inst.zeta / g_n(sol.power_per_user[n], d, inst.users[n].bandwidth_hz,
                                       inst.users[n].gain, inst.noise_w);
    }
  }

  double max_lat = 0.0;
  double sum_p = 0.0;
  for (std::size_t n = 0; n < n_users; ++n) {
    const double d = inst.payload_bits(n, res[n]);
    const double t_up = d == 0.0 ? 0.0
                                 : static_uplink_time(d, inst.users[n].bandwidth_hz,
                                                      sol.power_per_user[n], inst.users[n].gain,
                                                      inst.noise_w);
    sol.achieved_latency_s[n] = t_up + inst.gamma_s(res[n]);
    max_lat = std::max(max_lat, sol.achieved_latency_s[n]);
    sum_p += sol.power_per_user[n];
  }
  if (inst.zeta == 0.0) sol.tau_star = max_lat;
  sol.objective = max_lat + inst.zeta * sum_p;
  return sol;
}

// Full pipeline: resolution selection, then the convex power stage. The
// B&B result is cross-checked against the separable per-user scan.
inline ArpoSolution arpo_solve(const ArpoInstance& inst) {
  const auto scanned = scan_resolutions(inst);
  const auto branched = select_resolutions(inst);
  if (scanned != branched)
    throw std::logic_error("B&B resolution selection disagrees with the separable scan");
  return solve_powers(inst, branched);
}

}  // namespace laenet

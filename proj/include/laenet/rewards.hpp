#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "laenet/vec3.hpp"

namespace laenet {

// Per-slot features the reward functions (native and DSL) see.
struct RewardContext {
  std::vector<double> backlog;      // d_n[t], pre-transmission
  std::vector<double> transmitted;  // min{d_n[t], alpha*R_n[t]}
  std::vector<double> next_backlog;
  std::vector<double> rate;         // R_n[t], bits/s
  double slot_len_s = 1.0;
  int slot = 0;
  Vec3 uav_pos;       // pose at t
  Vec3 uav_pos_next;  // pose at t+1
  std::vector<Vec3> user_pos;

  std::size_t num_users() const { return backlog.size(); }

  // argmax_n d_n[t], ties to the lowest user index.
  std::size_t bottleneck() const {
    std::size_t best = 0;
    for (std::size_t n = 1; n < backlog.size(); ++n)
      if (backlog[n] > backlog[best]) best = n;
    return best;
  }
};

struct RiskRewardParams {
  double q = 0.9;
  double mu = 0.0;
  double gamma_d = 0.0;
};

// Empirical q-quantile: smallest element whose cumulative fraction reaches
// q (order statistic at ceil(q*N), 1-based).
inline double var_q(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("var_q of empty list");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q must be in (0,1)");
  std::sort(values.begin(), values.end());
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(k, 1) - 1];
}

// Risk-aware reward: tail backlog penalty + transmitted-bits credit +
// progress toward the bottleneck user.
inline double risk_reward(const RewardContext& ctx, const RiskRewardParams& p) {
  const double tail = var_q(ctx.backlog, p.q);
  double throughput = 0.0;
  for (std::size_t n = 0; n < ctx.num_users(); ++n)
    throughput += std::min(ctx.backlog[n], ctx.slot_len_s * ctx.rate[n]);
  const Vec3 target = ctx.user_pos[ctx.bottleneck()];
  const double delta_dist = dist3(ctx.uav_pos, target) - dist3(ctx.uav_pos_next, target);
  return -tail + p.mu * throughput + p.gamma_d * delta_dist;
}

// Default training weights: backlogs are O(1e7) bits, so the tail term
// dominates; these put throughput and progress shaping on a comparable
// footing, and the overall scale keeps per-step rewards O(1) so the
// critic's regression targets stay well-conditioned.
inline RiskRewardParams default_risk_params() { return {0.9, 0.5, 1e5}; }
inline constexpr double kRiskRewardScale = 1e-7;

inline double scaled_risk_reward(const RewardContext& ctx, const RiskRewardParams& p) {
  return kRiskRewardScale * risk_reward(ctx, p);
}

// Baseline hand-crafted reward: negative bottleneck backlog after the
// step, normalized by the episode's initial bottleneck.
inline double manual_bottleneck_reward(const RewardContext& ctx, double initial_max_backlog) {
  const double next_max = *std::max_element(ctx.next_backlog.begin(), ctx.next_backlog.end());
  if (initial_max_backlog <= 0.0) return 0.0;
  return -next_max / initial_max_backlog;
}

}  // namespace laenet

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "laenet/env.hpp"
#include "laenet/mlp.hpp"
#include "laenet/rewards.hpp"
#include "laenet/rng.hpp"

namespace laenet {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

// Diagonal Gaussian over a 3-D pre-squash variable; actions are tanh-squashed
// and scaled to the per-axis speed bounds (the env clamps again).
struct GaussianPolicy {
  Mlp mean_net;
  std::vector<double> log_std;
  std::vector<double> action_scale;  // per-axis

  GaussianPolicy(int obs_dim, const PhysConfig& phys, std::vector<int> hidden = {64, 64})
      : mean_net(make_sizes(obs_dim, hidden)),
        log_std(3, -0.5),
        action_scale{phys.slot_len_s * phys.v_xy_max_mps, phys.slot_len_s * phys.v_xy_max_mps,
                     phys.slot_len_s * phys.v_z_max_mps} {}

  static std::vector<int> make_sizes(int obs_dim, std::vector<int> hidden) {
    std::vector<int> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(3);
    return sizes;
  }

  void randomize(RngStream& rng) { mean_net.randomize(rng); }

  double std_of(int i) const { return std::exp(std::clamp(log_std[i], kLogStdMin, kLogStdMax)); }

  Action action_from_u(std::span<const double> u) const {
    return {action_scale[0] * std::tanh(u[0]), action_scale[1] * std::tanh(u[1]),
            action_scale[2] * std::tanh(u[2])};
  }

  struct Sample {
    std::vector<double> u;  // pre-squash
    Action action;
    double log_prob = 0.0;
  };

  Sample sample(std::span<const double> obs, RngStream& rng) const {
    const std::vector<double> mean = mean_net.forward(obs);
    Sample s;
    s.u.resize(3);
    for (int i = 0; i < 3; ++i) s.u[i] = mean[i] + std_of(i) * rng.normal();
    s.action = action_from_u(s.u);
    s.log_prob = log_prob_given_mean(mean, s.u);
    return s;
  }

  Action act_deterministic(std::span<const double> obs) const {
    return action_from_u(mean_net.forward(obs));
  }

  // log pi(a|s) for the stored pre-squash u, including the tanh and scale
  // change-of-variable terms.
  double log_prob_given_mean(std::span<const double> mean, std::span<const double> u) const {
    double lp = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double sd = std_of(i);
      const double z = (u[i] - mean[i]) / sd;
      lp += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
      // change of variable a = scale*tanh(u):
      // log pi(a) = log pdf_u(u) - log(1 - tanh(u)^2) - log scale,
      // with log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u))
      lp -= 2.0 * (std::numbers::ln2 - u[i] - std::log1p(std::exp(-2.0 * u[i])));
      lp -= std::log(action_scale[i]);
    }
    return lp;
  }

  double log_prob(std::span<const double> obs, std::span<const double> u) const {
    return log_prob_given_mean(mean_net.forward(obs), u);
  }

  // Accumulates coeff * d(log pi)/d(params) into the gradient buffers.
  void add_log_prob_grad(std::span<const double> obs, std::span<const double> u, double coeff,
                         std::vector<double>& net_grad, std::vector<double>& log_std_grad) const {
    Mlp::Cache cache;
    const std::vector<double> mean = mean_net.forward(obs, &cache);
    std::vector<double> dmean(3);
    for (int i = 0; i < 3; ++i) {
      const double cl = std::clamp(log_std[i], kLogStdMin, kLogStdMax);
      const double sd = std::exp(cl);
      const double z = (u[i] - mean[i]) / sd;
      dmean[i] = coeff * z / sd;
      if (log_std[i] > kLogStdMin && log_std[i] < kLogStdMax)
        log_std_grad[i] += coeff * (z * z - 1.0);
    }
    mean_net.backward(cache, dmean, net_grad);
  }
};

inline Mlp make_value_net(int obs_dim, std::vector<int> hidden = {64, 64}) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return Mlp(sizes);
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Standard recursive GAE. `dones[t]` marks s_{t+1} terminal; `bootstrap`
// is V(s_T) when the batch ends mid-episode.
inline GaeResult gae(std::span<const double> rewards, std::span<const double> values,
                     std::span<const int> dones, double gamma, double lambda,
                     double bootstrap = 0.0) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw std::invalid_argument("gae: sequence length mismatch");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_v = (i + 1 < n) ? values[i + 1] : bootstrap;
    const double delta = rewards[i] + gamma * next_v * not_done - values[i];
    adv = delta + gamma * lambda * not_done * adv;
    out.advantages[i] = adv;
    out.returns[i] = adv + values[i];
  }
  return out;
}

struct TrainConfig {
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double clip_eps = 0.2;
  double actor_lr = 1e-3;
  double critic_lr = 3e-3;
  double momentum = 0.9;
  int epochs = 10;
  int minibatch = 32;
  int steps_per_update = 64;
  int total_episodes = 300;
  std::uint64_t seed = 1;
};

struct RolloutBuffer {
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> u;
  std::vector<double> log_prob;
  std::vector<double> reward;
  std::vector<double> value;
  std::vector<int> done;

  std::size_t size() const { return obs.size(); }
  void clear() {
    obs.clear();
    u.clear();
    log_prob.clear();
    reward.clear();
    value.clear();
    done.clear();
  }
};

struct SgdMomentum {
  std::vector<double> velocity;
  double lr = 1e-3;
  double momentum = 0.9;

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    if (velocity.empty()) velocity.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity[i] = momentum * velocity[i] - lr * grad[i];
      params[i] += velocity[i];
    }
  }
};

struct UpdateMetrics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// One PPO update: normalized advantages, clipped surrogate for the actor,
// MSE-to-returns for the critic, minibatched SGD with momentum.
inline UpdateMetrics ppo_update(GaussianPolicy& policy, Mlp& value_net, const RolloutBuffer& buf,
                                const GaeResult& gae_out, const TrainConfig& cfg,
                                SgdMomentum& actor_opt, SgdMomentum& critic_opt,
                                SgdMomentum& log_std_opt, RngStream& rng) {
  const std::size_t n = buf.size();
  if (n == 0) throw std::invalid_argument("empty rollout buffer");
  std::vector<double> adv = gae_out.advantages;
  double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n)) + 1e-8;
  for (double& a : adv) a = (a - mean) / sd;

  UpdateMetrics metrics;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> actor_grad(policy.mean_net.params().size());
  std::vector<double> log_std_grad(policy.log_std.size());
  std::vector<double> critic_grad(value_net.params().size());
  double last_actor_loss = 0.0, last_critic_loss = 0.0, last_kl = 0.0, last_clip = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the deterministic stream
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    for (std::size_t start = 0; start < n; start += cfg.minibatch) {
      const std::size_t end = std::min(n, start + cfg.minibatch);
      const double inv_m = 1.0 / static_cast<double>(end - start);
      std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
      std::fill(log_std_grad.begin(), log_std_grad.end(), 0.0);
      std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
      double actor_loss = 0.0, critic_loss = 0.0, kl = 0.0, clipped = 0.0;

      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const double lp_new = policy.log_prob(buf.obs[idx], buf.u[idx]);
        const double ratio = std::exp(lp_new - buf.log_prob[idx]);
        const double a = adv[idx];
        const double unclipped = ratio * a;
        const double clip_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double surrogate = std::min(unclipped, clip_ratio * a);
        actor_loss -= surrogate * inv_m;
        kl += (buf.log_prob[idx] - lp_new) * inv_m;
        const bool use_unclipped = unclipped <= clip_ratio * a;
        if (!use_unclipped) clipped += inv_m;
        if (use_unclipped)  // d(-surrogate)/d(logp_new) = -ratio * a
          policy.add_log_prob_grad(buf.obs[idx], buf.u[idx], -ratio * a * inv_m, actor_grad,
                                   log_std_grad);

        Mlp::Cache cache;
        const double v = value_net.forward(buf.obs[idx], &cache)[0];
        const double err = v - gae_out.returns[idx];
        critic_loss += err * err * inv_m;
        const std::vector<double> dv{2.0 * err * inv_m};
        value_net.backward(cache, dv, critic_grad);
      }
      if (!std::isfinite(actor_loss) || !std::isfinite(critic_loss))
        throw std::runtime_error("non-finite PPO loss");
      actor_opt.step(policy.mean_net.params(), actor_grad);
      log_std_opt.step(policy.log_std, log_std_grad);
      for (double& ls : policy.log_std) ls = std::clamp(ls, kLogStdMin, kLogStdMax);
      critic_opt.step(value_net.params(), critic_grad);
      last_actor_loss = actor_loss;
      last_critic_loss = critic_loss;
      last_kl = kl;
      last_clip = clipped;
    }
  }
  metrics.actor_loss = last_actor_loss;
  metrics.critic_loss = last_critic_loss;
  metrics.approx_kl = last_kl;
  metrics.clip_fraction = last_clip;
  return metrics;
}

// ---- baseline policies ---------------------------------------------------

inline Policy random_policy(const PhysConfig& phys, std::uint64_t seed) {
  auto rng = std::make_shared<RngStream>(seed, "random-policy");
  const double max_xy = phys.slot_len_s * phys.v_xy_max_mps;
  const double max_z = phys.slot_len_s * phys.v_z_max_mps;
  return [rng, max_xy, max_z](const EnvState&) {
    return Action{rng->uniform(-max_xy, max_xy), rng->uniform(-max_xy, max_xy),
                  rng->uniform(-max_z, max_z)};
  };
}

// Max-speed step toward the users' centroid at a service altitude; stops
// within 1 m of the target.
inline Policy geometric_heuristic(const Scenario& sc, double service_altitude_m = 100.0) {
  Vec3 centroid{0.0, 0.0, service_altitude_m};
  for (const auto& u : sc.users) {
    centroid.x += u.pos_m.x / static_cast<double>(sc.users.size());
    centroid.y += u.pos_m.y / static_cast<double>(sc.users.size());
  }
  const double max_xy = sc.phys.slot_len_s * sc.phys.v_xy_max_mps;
  const double max_z = sc.phys.slot_len_s * sc.phys.v_z_max_mps;
  return [centroid, max_xy, max_z](const EnvState& st) {
    const Vec3 delta = centroid - st.uav_pos;
    if (delta.norm() <= 1.0) return Action{};
    Action a{delta.x, delta.y, std::clamp(delta.z, -max_z, max_z)};
    const double nxy = std::sqrt(a.dx_m * a.dx_m + a.dy_m * a.dy_m);
    if (nxy > max_xy) {
      a.dx_m *= max_xy / nxy;
      a.dy_m *= max_xy / nxy;
    }
    return a;
  };
}

inline Policy policy_of(GaussianPolicy pi, const Env& env) {
  return [pi = std::move(pi), &env](const EnvState& st) {
    return pi.act_deterministic(env.observe(st));
  };
}

// ---- training loop -------------------------------------------------------

struct LearningCurvePoint {
  int episode = 0;
  double max_latency_s = 0.0;
};

struct TrainResult {
  GaussianPolicy policy;
  Mlp value_net;
  std::vector<LearningCurvePoint> curve;
};

inline TrainResult train(const Scenario& sc, const ArpoSolution& sol,
                         const std::function<double(const RewardContext&)>& reward_fn,
                         const TrainConfig& cfg) {
  Env env(sc, sol, cfg.seed);
  const int obs_dim = static_cast<int>(env.obs_dim());
  RngStream init_rng(cfg.seed, "init");
  RngStream policy_rng(cfg.seed, "policy");
  RngStream shuffle_rng(cfg.seed, "shuffle");

  TrainResult result{GaussianPolicy(obs_dim, sc.phys), make_value_net(obs_dim), {}};
  result.policy.randomize(init_rng);
  Mlp& value_net = result.value_net;
  {
    RngStream vrng(cfg.seed, "value-init");
    value_net.randomize(vrng);
  }

  SgdMomentum actor_opt{{}, cfg.actor_lr, cfg.momentum};
  SgdMomentum critic_opt{{}, cfg.critic_lr, cfg.momentum};
  SgdMomentum log_std_opt{{}, cfg.actor_lr, cfg.momentum};

  RolloutBuffer buf;
  int episode = 0;
  env.reset();
  while (episode < cfg.total_episodes) {
    buf.clear();
    while (static_cast<int>(buf.size()) < cfg.steps_per_update &&
           episode < cfg.total_episodes) {
      const std::vector<double> obs = env.observe();
      const auto s = result.policy.sample(obs, policy_rng);
      StepOutcome out = env.step(s.action);
      buf.obs.push_back(obs);
      buf.u.push_back(s.u);
      buf.log_prob.push_back(s.log_prob);
      buf.reward.push_back(reward_fn(out.ctx));
      buf.value.push_back(value_net.forward(obs)[0]);
      buf.done.push_back(out.done ? 1 : 0);
      if (out.done) {
        result.curve.push_back({episode, episode_latency(env).max_s});
        ++episode;
        env.reset();
      }
    }
    if (buf.size() == 0) break;
    const double bootstrap = buf.done.back() ? 0.0 : value_net.forward(env.observe())[0];
    const GaeResult adv = gae(buf.reward, buf.value, buf.done, cfg.gamma, cfg.lambda_gae,
                              bootstrap);
    ppo_update(result.policy, value_net, buf, adv, cfg, actor_opt, critic_opt, log_std_opt,
               shuffle_rng);
  }
  return result;
}

// ---- checkpoints ---------------------------------------------------------

inline std::string save_checkpoint(const GaussianPolicy& pi) {
  std::string out = "laenet-policy v1\nsizes " + std::to_string(pi.mean_net.sizes().size());
  for (int s : pi.mean_net.sizes()) out += " " + std::to_string(s);
  out += "\nlog_std";
  char buf[64];
  for (double v : pi.log_std) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    out += buf;
  }
  out += "\nscale";
  for (double v : pi.action_scale) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    out += buf;
  }
  out += "\nparams";
  for (double v : pi.mean_net.params()) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    out += buf;
  }
  out += "\n";
  return out;
}

inline GaussianPolicy load_checkpoint(const std::string& text, const PhysConfig& phys) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "laenet-policy v1") throw std::invalid_argument("bad checkpoint header");
  std::string tag;
  in >> tag;
  if (tag != "sizes") throw std::invalid_argument("expected sizes");
  std::size_t n_sizes = 0;
  in >> n_sizes;
  std::vector<int> sizes(n_sizes);
  for (int& s : sizes) in >> s;
  if (sizes.size() < 2 || sizes.back() != 3)
    throw std::invalid_argument("bad checkpoint layer sizes");
  GaussianPolicy pi(sizes.front(), phys,
                    std::vector<int>(sizes.begin() + 1, sizes.end() - 1));
  in >> tag;
  if (tag != "log_std") throw std::invalid_argument("expected log_std");
  for (double& v : pi.log_std) in >> v;
  in >> tag;
  if (tag != "scale") throw std::invalid_argument("expected scale");
  for (double& v : pi.action_scale) in >> v;
  in >> tag;
  if (tag != "params") throw std::invalid_argument("expected params");
  for (double& v : pi.mean_net.params()) in >> v;
  if (!in) throw std::invalid_argument("truncated checkpoint");
  return pi;
}

// Mean max-latency of a policy over a number of fresh episodes.
inline double mean_max_latency(const Scenario& sc, const ArpoSolution& sol, const Policy& policy,
                               int episodes, std::uint64_t seed) {
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Env env(sc, sol, seed + static_cast<std::uint64_t>(e));
    run_episode(env, policy);
    sum += episode_latency(env).max_s;
  }
  return sum / episodes;
}

}  // namespace laenet

// Experiment runner: solver runs, policy training/evaluation, reward design,
// and sweeps, all persisted under runs/<hash>/ for reproducibility.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "laenet/env.hpp"
#include "laenet/llm_http.hpp"
#include "laenet/ppo.hpp"
#include "laenet/reward_designer.hpp"
#include "laenet/reward_dsl.hpp"

namespace fs = std::filesystem;
using namespace laenet;

namespace {

constexpr const char* kArtifactVersion = "1";

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::runtime_error("empty list: " + csv);
  return out;
}

// Persists every output of one command invocation under runs/<hash>/.
class RunDir {
 public:
  RunDir(const std::string& root, const std::string& command, const std::string& config_text,
         std::uint64_t seed, const std::string& args = "")
      : started_(std::chrono::steady_clock::now()) {
    record_["artifact_version"] = kArtifactVersion;
    record_["command"] = command;
    if (!args.empty()) record_["args"] = args;
    record_["seed"] = seed;
    record_["config"] = Json::parse(config_text);
    record_["scenario_hash"] = fnv1a_hex(config_text);
    const std::string key =
        command + "\n" + std::to_string(seed) + "\n" + config_text + "\n" + args;
    dir_ = fs::path(root) / (command + "-" + fnv1a_hex(key));
    fs::create_directories(dir_);
    record_["outputs"] = Json::array();
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name);
    out << content;
    record_["outputs"].push_back(name);
    std::cout << "wrote " << (dir_ / name).string() << "\n";
  }

  void finish() {
    const auto elapsed = std::chrono::steady_clock::now() - started_;
    record_["wall_clock_s"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() / 1000.0;
    std::ofstream out(dir_ / "record.json");
    out << record_.dump(2) << "\n";
    std::cout << "wrote " << (dir_ / "record.json").string() << "\n";
  }

  Json& record() { return record_; }

 private:
  fs::path dir_;
  Json record_;
  std::chrono::steady_clock::time_point started_;
};

Json solution_json(const ArpoSolution& sol) {
  Json j;
  j["res_per_user"] = sol.res_per_user;
  j["power_per_user"] = sol.power_per_user;
  j["clamped"] = sol.clamp_flags;
  j["achieved_latency_s"] = sol.achieved_latency_s;
  j["tau_star"] = sol.tau_star;
  j["objective"] = sol.objective;
  return j;
}

// Observation builder usable with any env sharing the scenario (the policy
// must outlive per-batch envs).
std::vector<double> observe_like(const Scenario& sc, const EnvState& st) {
  std::vector<double> obs;
  const std::size_t n_users = sc.users.size();
  const double pos_scale = 2.0 * sc.phys.area_half_m;
  const double max_pixels = static_cast<double>(sc.profile.entries().back().pixels);
  for (std::size_t n = 0; n < n_users; ++n) {
    obs.push_back(st.rel_pos[n].x / pos_scale);
    obs.push_back(st.rel_pos[n].y / pos_scale);
    obs.push_back(st.rel_pos[n].z / pos_scale);
  }
  for (std::size_t n = 0; n < n_users; ++n)
    obs.push_back(static_cast<double>(st.res_per_user[n]) / max_pixels);
  for (std::size_t n = 0; n < n_users; ++n)
    obs.push_back(st.power_per_user[n] / sc.users[n].p_max_w);
  for (std::size_t n = 0; n < n_users; ++n)
    obs.push_back((std::log10(st.gain_per_user[n]) + 12.0) / 4.0);
  for (std::size_t n = 0; n < n_users; ++n) {
    const double init = sc.profile.payload_bits(st.res_per_user[n], sc.users[n].n_queries);
    obs.push_back(init > 0.0 ? st.backlog_bits[n] / init : 0.0);
  }
  return obs;
}

Policy checkpoint_policy(const std::string& path, const Scenario& sc) {
  auto pi = std::make_shared<GaussianPolicy>(load_checkpoint(read_file(path), sc.phys));
  return [pi, sc](const EnvState& st) { return pi->act_deterministic(observe_like(sc, st)); };
}

void check_kinematics(const EpisodeLog& log, const PhysConfig& phys) {
  for (std::size_t i = 1; i < log.waypoints.size(); ++i) {
    const auto& a = log.waypoints[i - 1];
    const auto& b = log.waypoints[i];
    const double dx = b.x - a.x, dy = b.y - a.y, dz = b.z - a.z;
    const double eps = 1e-9;
    if (std::sqrt(dx * dx + dy * dy) > phys.slot_len_s * phys.v_xy_max_mps + eps ||
        std::abs(dz) > phys.slot_len_s * phys.v_z_max_mps + eps ||
        b.z < phys.h_min_m - eps || b.z > phys.h_max_m + eps)
      throw std::runtime_error("trajectory violates kinematic constraints at waypoint " +
                               std::to_string(i));
  }
}

std::string trajectory_csv(const EpisodeLog& log) {
  std::ostringstream out;
  out << "t_s,x_m,y_m,z_m\n";
  for (const auto& w : log.waypoints) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", w.t_s, w.x, w.y, w.z);
    out << buf;
  }
  return out.str();
}

// ---- subcommands ---------------------------------------------------------

int cmd_arpo(const std::string& config_text, std::uint64_t seed, const std::string& out_root,
             std::optional<double> zeta_override, std::optional<std::vector<double>> pose,
             const std::string& sweep_spec) {
  Scenario sc = load_scenario(config_text);
  if (zeta_override) sc.zeta = *zeta_override;
  Vec3 at = sc.uav_start;
  if (pose) at = {(*pose)[0], (*pose)[1], (*pose)[2]};

  std::ostringstream arpo_args;
  arpo_args << "pose=" << at.x << "," << at.y << "," << at.z << " sweep=" << sweep_spec;
  RunDir run(out_root, "arpo", save_scenario(sc), seed, arpo_args.str());
  const ArpoSolution sol = arpo_solve(make_instance(sc, at));
  run.write("solution.json", solution_json(sol).dump(2) + "\n");
  std::cout << solution_json(sol).dump(2) << "\n";

  if (!sweep_spec.empty()) {
    double lo, hi;
    int steps;
    if (std::sscanf(sweep_spec.c_str(), "%lf:%lf:%d", &lo, &hi, &steps) != 3 || steps < 2)
      throw std::runtime_error("--sweep-zeta expects lo:hi:steps");
    std::ostringstream csv;
    csv << "zeta,sum_power_w,max_latency_s\n";
    for (int i = 0; i < steps; ++i) {
      Scenario s2 = sc;
      s2.zeta = lo + (hi - lo) * i / (steps - 1);
      const ArpoSolution s = arpo_solve(make_instance(s2, at));
      double sum_p = 0.0, max_lat = 0.0;
      for (std::size_t n = 0; n < s.power_per_user.size(); ++n) {
        sum_p += s.power_per_user[n];
        max_lat = std::max(max_lat, s.achieved_latency_s[n]);
      }
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", s2.zeta, sum_p, max_lat);
      csv << buf;
    }
    run.write("zeta_sweep.csv", csv.str());
  }
  run.finish();
  return 0;
}

int cmd_train(const std::string& config_text, std::uint64_t seed, const std::string& out_root,
              const std::string& reward_kind, const std::string& baseline, int episodes,
              const std::string& seeds_csv) {
  const Scenario sc = load_scenario(config_text);
  const ArpoSolution sol = arpo_solve(make_instance(sc));

  std::vector<std::uint64_t> seeds;
  for (double s : parse_list(seeds_csv)) seeds.push_back(static_cast<std::uint64_t>(s));

  const std::string mode = baseline.empty() ? "train-" + reward_kind : "baseline-" + baseline;
  RunDir run(out_root, "train", save_scenario(sc), seed,
             mode + " episodes=" + std::to_string(episodes) + " seeds=" + seeds_csv);
  run.record()["mode"] = mode;

  if (!baseline.empty()) {
    // evaluation only, no learning
    double sum = 0.0;
    EpisodeLog last_log;
    for (std::uint64_t s : seeds) {
      Env env(sc, sol, s);
      const Policy pol =
          baseline == "rp" ? random_policy(sc.phys, s) : geometric_heuristic(sc);
      last_log = run_episode(env, pol);
      sum += episode_latency(env).max_s;
    }
    check_kinematics(last_log, sc.phys);
    run.write("trajectory.csv", trajectory_csv(last_log));
    const double mean = sum / static_cast<double>(seeds.size());
    run.record()["mean_max_latency_s"] = mean;
    std::cout << "baseline " << baseline << " mean max-latency: " << mean << " s\n";
    run.finish();
    return 0;
  }

  std::function<double(const RewardContext&)> reward_fn;
  double initial_max_backlog = 0.0;
  for (std::size_t n = 0; n < sc.users.size(); ++n)
    initial_max_backlog = std::max(
        initial_max_backlog, sc.profile.payload_bits(sol.res_per_user[n], sc.users[n].n_queries));
  if (reward_kind == "risk") {
    const RiskRewardParams p = default_risk_params();
    reward_fn = [p](const RewardContext& ctx) { return scaled_risk_reward(ctx, p); };
  } else if (reward_kind == "manual") {
    reward_fn = [initial_max_backlog](const RewardContext& ctx) {
      return manual_bottleneck_reward(ctx, initial_max_backlog);
    };
  } else {
    auto program =
        std::make_shared<dsl::RewardProgram>(dsl::RewardProgram::parse(read_file(reward_kind)));
    reward_fn = [program](const RewardContext& ctx) { return program->evaluate(ctx); };
  }

  // learning curve: per-episode mean and variance across seeds
  std::vector<std::vector<double>> curves;
  double final_sum = 0.0;
  EpisodeLog last_log;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    TrainConfig cfg;
    cfg.total_episodes = episodes;
    cfg.seed = seeds[k];
    const TrainResult tr = train(sc, sol, reward_fn, cfg);
    std::vector<double> c;
    for (const auto& pt : tr.curve) c.push_back(pt.max_latency_s);
    curves.push_back(std::move(c));
    run.write("policy_seed" + std::to_string(seeds[k]) + ".txt", save_checkpoint(tr.policy));
    Env env(sc, sol, seeds[k] + 1000);
    const Policy pol = policy_of(tr.policy, env);
    last_log = run_episode(env, pol);
    final_sum += episode_latency(env).max_s;
  }
  std::size_t n_ep = 0;
  for (const auto& c : curves) n_ep = std::max(n_ep, c.size());
  std::ostringstream csv;
  csv << "episode,mean_max_latency_s,var_max_latency_s\n";
  for (std::size_t e = 0; e < n_ep; ++e) {
    double sum = 0.0, count = 0.0;
    for (const auto& c : curves)
      if (e < c.size()) {
        sum += c[e];
        count += 1.0;
      }
    const double mean = sum / count;
    double var = 0.0;
    for (const auto& c : curves)
      if (e < c.size()) var += (c[e] - mean) * (c[e] - mean);
    var /= count;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, mean, var);
    csv << buf;
  }
  run.write("curve.csv", csv.str());
  check_kinematics(last_log, sc.phys);
  run.write("trajectory.csv", trajectory_csv(last_log));
  const double mean_final = final_sum / static_cast<double>(seeds.size());
  run.record()["mean_max_latency_s"] = mean_final;
  std::cout << "trained (" << reward_kind << ") mean max-latency: " << mean_final << " s\n";
  run.finish();
  return 0;
}

int cmd_design(const std::string& config_text, std::uint64_t seed, const std::string& out_root,
               const std::string& client_spec, int k, int rounds, const std::string& insights,
               const std::string& replay_path) {
  const Scenario sc = load_scenario(config_text);

  if (!replay_path.empty()) {
    const DesignTranscript t = transcript_from_json(Json::parse(read_file(replay_path)));
    std::string program;
    const auto id = select_best(t, &program);
    if (!id) throw std::runtime_error("transcript holds no valid scored candidate");
    std::cout << "replayed selection: candidate " << *id << "\n" << program << "\n";
    return 0;
  }

  std::unique_ptr<ChatClient> client;
  if (client_spec.rfind("mock:", 0) == 0) {
    client = std::make_unique<MockChatClient>(
        MockChatClient::from_file(client_spec.substr(5)));
  } else if (client_spec == "http") {
    client = std::make_unique<HttpChatClient>();
  } else {
    throw std::runtime_error("--client expects mock:FILE or http");
  }

  DesignerConfig cfg;
  cfg.candidates_per_round = k;
  cfg.rounds = rounds;
  if (!insights.empty()) cfg.human_notes = read_file(insights);

  RunDir run(out_root, "design", save_scenario(sc), seed,
             "client=" + client_spec + " k=" + std::to_string(k) +
                 " rounds=" + std::to_string(rounds) + " insights=" + insights);
  const ArpoSolution sol = arpo_solve(make_instance(sc));
  DesignTranscript partial;
  try {
    const DesignResult res = design(sc, sol, *client, cfg, &partial);
    run.write("transcript.json", transcript_to_json(res.transcript).dump(2) + "\n");
    if (res.best) {
      run.write("best_program.txt", res.best->program_text + "\n");
      std::cout << "selected candidate " << res.best->id << ":\n"
                << res.best->program_text << "\n";
    } else {
      std::cout << "no valid candidate survived evaluation\n";
    }
    run.finish();
    return res.best ? 0 : 1;
  } catch (const ClientError& e) {
    run.write("transcript.json", transcript_to_json(partial).dump(2) + "\n");
    run.finish();
    std::cerr << "designer aborted: " << e.what() << " (partial transcript saved)\n";
    return 1;
  }
}

int cmd_sweep_resources(const std::string& config_text, std::uint64_t seed,
                        const std::string& out_root, const std::string& bw_csv,
                        const std::string& pmax_csv, const std::string& policy_path) {
  const Scenario base = load_scenario(config_text);
  const std::vector<double> bws = parse_list(bw_csv);
  const std::vector<double> pmaxs = parse_list(pmax_csv);

  RunDir run(out_root, "sweep-resources", save_scenario(base), seed,
             "bw=" + bw_csv + " pmax=" + pmax_csv + " policy=" + policy_path);
  std::ostringstream csv;
  csv << "pmax_w";
  for (double b : bws) csv << ",latency_s_at_" << b << "hz";
  csv << "\n";
  for (double p : pmaxs) {
    csv << p;
    for (double b : bws) {
      Scenario sc = base;
      for (auto& u : sc.users) {
        u.bandwidth_hz = b;
        u.p_max_w = p;
      }
      const ArpoSolution sol = arpo_solve(make_instance(sc));
      Env env(sc, sol, seed);
      const Policy pol = policy_path.empty() ? geometric_heuristic(sc)
                                             : checkpoint_policy(policy_path, sc);
      run_episode(env, pol);
      char buf[64];
      std::snprintf(buf, sizeof(buf), ",%.17g", episode_latency(env).max_s);
      csv << buf;
    }
    csv << "\n";
  }
  run.write("latency_matrix.csv", csv.str());
  run.finish();
  return 0;
}

int cmd_batches(const std::vector<std::string>& config_paths, std::uint64_t seed,
                const std::string& out_root, const std::string& policy_path) {
  if (config_paths.empty()) throw std::runtime_error("need at least one batch config");
  std::vector<Scenario> batches;
  std::string combined_cfg;
  for (const auto& p : config_paths) {
    const std::string text = read_file(p);
    combined_cfg += text;
    batches.push_back(load_scenario(text));
  }
  RunDir run(out_root, "batches", save_scenario(batches.front()), seed,
             "batches=" + fnv1a_hex(combined_cfg) + " policy=" + policy_path);
  const Policy pol = policy_path.empty() ? geometric_heuristic(batches.front())
                                         : checkpoint_policy(policy_path, batches.front());
  const auto logs = run_batches(batches, pol, seed);

  std::ostringstream all;
  all << "batch,t_s,x_m,y_m,z_m\n";
  double total_elapsed = 0.0;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    check_kinematics(logs[k], batches[k].phys);
    run.write("batch_" + std::to_string(k) + "_trajectory.csv", trajectory_csv(logs[k]));
    for (std::size_t i = k == 0 ? 0 : 1; i < logs[k].waypoints.size(); ++i) {
      const auto& w = logs[k].waypoints[i];
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", k, w.t_s, w.x, w.y, w.z);
      all << buf;
    }
    total_elapsed += logs[k].elapsed_s;
    if (k > 0) {
      const auto& prev = logs[k - 1].waypoints.back();
      const auto& cur = logs[k].waypoints.front();
      if (prev.x != cur.x || prev.y != cur.y || prev.z != cur.z)
        throw std::runtime_error("batch continuity violated");
    }
  }
  run.write("trajectory.csv", all.str());
  run.record()["total_mission_time_s"] = total_elapsed;
  std::cout << "total mission time: " << total_elapsed << " s over " << logs.size()
            << " batches\n";
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV inference-offloading experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root = "runs";
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "scenario config JSON (default: built-in)");
  app.add_option("--out", out_root, "output root directory");
  app.add_option("--seed", seed, "base seed (LAENET_SEED overrides)");

  auto* arpo = app.add_subcommand("arpo", "solve resolution/power allocation");
  std::optional<double> zeta;
  std::vector<double> pose;
  std::string sweep_spec;
  arpo->add_option("--zeta", zeta, "latency/power trade-off weight");
  arpo->add_option("--pose", pose, "UAV pose x y z for the channel snapshot")->expected(3);
  arpo->add_option("--sweep-zeta", sweep_spec, "lo:hi:steps sweep, emits CSV");

  auto* train_cmd = app.add_subcommand("train", "train or evaluate a trajectory policy");
  std::string reward_kind = "risk";
  std::string baseline;
  int episodes = 300;
  std::string seeds_csv = "1,2,3";
  train_cmd->add_option("--reward", reward_kind, "risk | manual | path to a DSL program file");
  train_cmd->add_option("--baseline", baseline, "rp | gh (evaluate only, no training)")
      ->check(CLI::IsMember({"rp", "gh", ""}));
  train_cmd->add_option("--episodes", episodes, "training episodes per seed");
  train_cmd->add_option("--seeds", seeds_csv, "comma-separated seeds");

  auto* design_cmd = app.add_subcommand("design", "run the reward-design loop");
  std::string client_spec = "mock:transcript.json";
  int k = 4, rounds = 3;
  std::string insights, replay_path;
  design_cmd->add_option("--client", client_spec, "mock:FILE or http");
  design_cmd->add_option("--k", k, "candidates per round");
  design_cmd->add_option("--rounds", rounds, "design rounds");
  design_cmd->add_option("--insights", insights, "human-insights text file");
  design_cmd->add_option("--replay", replay_path, "re-select from a saved transcript");

  auto* sweep = app.add_subcommand("sweep-resources", "latency over (bandwidth, P_max) grid");
  std::string bw_csv = "1e6,2e6,3e6";
  std::string pmax_csv = "0.1,0.3,0.5";
  std::string policy_path;
  sweep->add_option("--bandwidth-list", bw_csv, "comma-separated bandwidths (Hz)");
  sweep->add_option("--pmax-list", pmax_csv, "comma-separated power budgets (W)");
  sweep->add_option("--policy", policy_path, "frozen policy checkpoint (default: heuristic)");

  auto* batches_cmd = app.add_subcommand("batches", "serve user batches sequentially");
  std::vector<std::string> batch_configs;
  std::string batches_policy;
  batches_cmd->add_option("configs", batch_configs, "batch scenario configs, in order");
  batches_cmd->add_option("--policy", batches_policy, "frozen policy checkpoint");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string config_text =
        config_path.empty() ? save_scenario(default_scenario()) : read_file(config_path);
    seed = resolve_seed(seed);
    if (arpo->parsed())
      return cmd_arpo(config_text, seed, out_root, zeta,
                      pose.empty() ? std::nullopt : std::optional(pose), sweep_spec);
    if (train_cmd->parsed())
      return cmd_train(config_text, seed, out_root, reward_kind, baseline, episodes, seeds_csv);
    if (design_cmd->parsed())
      return cmd_design(config_text, seed, out_root, client_spec, k, rounds, insights,
                        replay_path);
    if (sweep->parsed())
      return cmd_sweep_resources(config_text, seed, out_root, bw_csv, pmax_csv, policy_path);
    if (batches_cmd->parsed()) return cmd_batches(batch_configs, seed, out_root, batches_policy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

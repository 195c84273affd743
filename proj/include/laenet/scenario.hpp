#pragma once

#include <cstdlib>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "laenet/units.hpp"
#include "laenet/vec3.hpp"
#include "laenet/vlm_profile.hpp"

namespace laenet {

using Json = nlohmann::ordered_json;

struct PhysConfig {
  double slot_len_s = 1.0;  // alpha
  int horizon_slots = 50;   // T
  double h_min_m = 50.0;
  double h_max_m = 300.0;
  double v_xy_max_mps = 100.0;
  double v_z_max_mps = 20.0;
  double area_half_m = 500.0;
};

enum class FadingMode { UnitModulus, Rayleigh };

struct ChannelConfig {
  double a_los = 4.88;
  double b_los = 0.43;
  double gamma_los = 2.0;
  double gamma_nlos = 2.0;
  double beta0_db = -50.0;
  double noise_dbm = -100.0;
  FadingMode fading_mode = FadingMode::UnitModulus;

  double beta0_lin() const { return db_to_linear(beta0_db); }
  double noise_w() const { return dbm_to_watts(noise_dbm); }
};

struct UserTask {
  int id = 0;
  Vec3 pos_m;               // (x, y, h)
  int n_queries = 1;        // M_n
  double acc_min = 0.0;     // A_n^min
  double bandwidth_hz = 1e6;
  double p_max_w = 0.1;
};

struct Scenario {
  PhysConfig phys;
  ChannelConfig chan;
  std::vector<UserTask> users;
  Vec3 uav_start{-500.0, -500.0, 150.0};
  double zeta = 0.0;
  double t_down_s = 0.1;
  double expected_out_tokens = 20.0;
  ResolutionProfile profile = default_profile();

  void validate() const {
    if (phys.slot_len_s <= 0.0) throw std::invalid_argument("slot_len_s must be > 0");
    if (phys.horizon_slots < 1) throw std::invalid_argument("horizon_slots must be >= 1");
    if (!(phys.h_min_m > 0.0 && phys.h_min_m < phys.h_max_m))
      throw std::invalid_argument("h_min < h_max violated");
    if (phys.v_xy_max_mps <= 0.0 || phys.v_z_max_mps <= 0.0)
      throw std::invalid_argument("speed limits must be > 0");
    if (chan.a_los <= 0.0 || chan.b_los <= 0.0)
      throw std::invalid_argument("LoS sigmoid parameters must be > 0");
    if (chan.gamma_los <= 0.0 || chan.gamma_nlos <= 0.0)
      throw std::invalid_argument("path-loss exponents must be > 0");
    if (zeta < 0.0) throw std::invalid_argument("zeta must be >= 0");
    if (t_down_s < 0.0) throw std::invalid_argument("t_down_s must be >= 0");
    if (expected_out_tokens < 0.0)
      throw std::invalid_argument("expected_out_tokens must be >= 0");
    if (uav_start.z < phys.h_min_m || uav_start.z > phys.h_max_m)
      throw std::invalid_argument("uav_start altitude outside [h_min, h_max]");
    for (const auto& u : users) {
      if (u.n_queries < 1) throw std::invalid_argument("n_queries must be >= 1");
      if (u.acc_min < 0.0 || u.acc_min > 1.0)
        throw std::invalid_argument("acc_min out of [0,1]");
      if (u.bandwidth_hz <= 0.0) throw std::invalid_argument("bandwidth_hz must be > 0");
      if (u.p_max_w <= 0.0) throw std::invalid_argument("p_max_w must be > 0");
      if (std::abs(u.pos_m.x) > phys.area_half_m || std::abs(u.pos_m.y) > phys.area_half_m)
        throw std::invalid_argument("user " + std::to_string(u.id) + " outside area");
    }
  }
};

// Default experiment setup: 1000x1000 m area, 4 users — two high-demand,
// high-accuracy users far from the start and two low-demand users nearer —
// with the UAV starting at (-500,-500,150).
inline Scenario default_scenario() {
  Scenario s;
  s.users = {
      {0, {-350.0, 400.0, 0.0}, 2, 0.67, 1e6, 0.1},
      {1, {-150.0, 350.0, 0.0}, 2, 0.67, 1e6, 0.1},
      {2, {-250.0, -300.0, 0.0}, 1, 0.60, 1e6, 0.1},
      {3, {100.0, -150.0, 0.0}, 1, 0.60, 1e6, 0.1},
  };
  s.validate();
  return s;
}

// ---- config (de)serialization -------------------------------------------

namespace detail {

inline void require_keys(const Json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
}

inline double num(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument("missing key '" + key + "' in " + where);
  if (!j[key].is_number())
    throw std::invalid_argument("key '" + key + "' in " + where + " must be a number");
  return j[key].get<double>();
}

inline Vec3 vec3_of(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(where + " must be an array [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

inline Json save_profile(const ResolutionProfile& p) {
  Json rows = Json::array();
  for (const auto& e : p.entries()) {
    rows.push_back({{"label", e.label},
                    {"pixels", e.pixels},
                    {"accuracy", e.accuracy},
                    {"speed_tok_s", e.speed_tok_s},
                    {"payload_mb", e.payload_mb}});
  }
  return rows;
}

inline ResolutionProfile load_profile(const Json& rows) {
  if (!rows.is_array()) throw std::invalid_argument("vlm_profile must be an array");
  std::vector<ProfileEntry> entries;
  for (const auto& r : rows) {
    detail::require_keys(r, {"label", "pixels", "accuracy", "speed_tok_s", "payload_mb"},
                         "vlm_profile row");
    ProfileEntry e;
    e.label = r.at("label").get<std::string>();
    e.pixels = r.at("pixels").get<std::int64_t>();
    e.accuracy = detail::num(r, "accuracy", "vlm_profile row");
    e.speed_tok_s = detail::num(r, "speed_tok_s", "vlm_profile row");
    e.payload_mb = detail::num(r, "payload_mb", "vlm_profile row");
    entries.push_back(std::move(e));
  }
  return ResolutionProfile(std::move(entries));
}

inline std::string save_scenario(const Scenario& s) {
  Json j;
  j["phys"] = {{"slot_len_s", s.phys.slot_len_s},
               {"horizon_slots", s.phys.horizon_slots},
               {"h_min_m", s.phys.h_min_m},
               {"h_max_m", s.phys.h_max_m},
               {"v_xy_max_mps", s.phys.v_xy_max_mps},
               {"v_z_max_mps", s.phys.v_z_max_mps},
               {"area_half_m", s.phys.area_half_m}};
  j["chan"] = {{"a_los", s.chan.a_los},
               {"b_los", s.chan.b_los},
               {"gamma_los", s.chan.gamma_los},
               {"gamma_nlos", s.chan.gamma_nlos},
               {"beta0_db", s.chan.beta0_db},
               {"noise_dbm", s.chan.noise_dbm},
               {"fading_mode",
                s.chan.fading_mode == FadingMode::UnitModulus ? "unit-modulus" : "rayleigh"}};
  j["users"] = Json::array();
  for (const auto& u : s.users) {
    j["users"].push_back({{"id", u.id},
                          {"pos_m", {u.pos_m.x, u.pos_m.y, u.pos_m.z}},
                          {"n_queries", u.n_queries},
                          {"acc_min", u.acc_min},
                          {"bandwidth_hz", u.bandwidth_hz},
                          {"p_max_w", u.p_max_w}});
  }
  j["uav_start"] = {s.uav_start.x, s.uav_start.y, s.uav_start.z};
  j["zeta"] = s.zeta;
  j["t_down_s"] = s.t_down_s;
  j["expected_out_tokens"] = s.expected_out_tokens;
  j["vlm_profile"] = save_profile(s.profile);
  return j.dump(2) + "\n";
}

inline Scenario load_scenario(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  detail::require_keys(j,
                       {"phys", "chan", "users", "uav_start", "zeta", "t_down_s",
                        "expected_out_tokens", "vlm_profile"},
                       "scenario");
  Scenario s;
  if (j.contains("phys")) {
    const auto& p = j["phys"];
    detail::require_keys(p,
                         {"slot_len_s", "horizon_slots", "h_min_m", "h_max_m", "v_xy_max_mps",
                          "v_z_max_mps", "area_half_m"},
                         "phys");
    s.phys.slot_len_s = detail::num(p, "slot_len_s", "phys");
    s.phys.horizon_slots = static_cast<int>(detail::num(p, "horizon_slots", "phys"));
    s.phys.h_min_m = detail::num(p, "h_min_m", "phys");
    s.phys.h_max_m = detail::num(p, "h_max_m", "phys");
    s.phys.v_xy_max_mps = detail::num(p, "v_xy_max_mps", "phys");
    s.phys.v_z_max_mps = detail::num(p, "v_z_max_mps", "phys");
    s.phys.area_half_m = detail::num(p, "area_half_m", "phys");
  }
  if (j.contains("chan")) {
    const auto& c = j["chan"];
    detail::require_keys(c,
                         {"a_los", "b_los", "gamma_los", "gamma_nlos", "beta0_db", "noise_dbm",
                          "fading_mode"},
                         "chan");
    s.chan.a_los = detail::num(c, "a_los", "chan");
    s.chan.b_los = detail::num(c, "b_los", "chan");
    s.chan.gamma_los = detail::num(c, "gamma_los", "chan");
    s.chan.gamma_nlos = detail::num(c, "gamma_nlos", "chan");
    s.chan.beta0_db = detail::num(c, "beta0_db", "chan");
    s.chan.noise_dbm = detail::num(c, "noise_dbm", "chan");
    if (c.contains("fading_mode")) {
      const std::string m = c["fading_mode"].get<std::string>();
      if (m == "unit-modulus")
        s.chan.fading_mode = FadingMode::UnitModulus;
      else if (m == "rayleigh")
        s.chan.fading_mode = FadingMode::Rayleigh;
      else
        throw std::invalid_argument("fading_mode must be 'unit-modulus' or 'rayleigh'");
    }
  }
  if (j.contains("users")) {
    if (!j["users"].is_array()) throw std::invalid_argument("users must be an array");
    for (const auto& ju : j["users"]) {
      detail::require_keys(ju, {"id", "pos_m", "n_queries", "acc_min", "bandwidth_hz", "p_max_w"},
                           "user");
      UserTask u;
      u.id = static_cast<int>(detail::num(ju, "id", "user"));
      u.pos_m = detail::vec3_of(ju.at("pos_m"), "user.pos_m");
      u.n_queries = static_cast<int>(detail::num(ju, "n_queries", "user"));
      u.acc_min = detail::num(ju, "acc_min", "user");
      u.bandwidth_hz = detail::num(ju, "bandwidth_hz", "user");
      u.p_max_w = detail::num(ju, "p_max_w", "user");
      s.users.push_back(u);
    }
  }
  if (j.contains("uav_start")) s.uav_start = detail::vec3_of(j["uav_start"], "uav_start");
  if (j.contains("zeta")) s.zeta = detail::num(j, "zeta", "scenario");
  if (j.contains("t_down_s")) s.t_down_s = detail::num(j, "t_down_s", "scenario");
  if (j.contains("expected_out_tokens"))
    s.expected_out_tokens = detail::num(j, "expected_out_tokens", "scenario");
  if (j.contains("vlm_profile")) s.profile = load_profile(j["vlm_profile"]);
  s.validate();
  return s;
}

// Seed resolution: LAENET_SEED overrides the given default.
inline std::uint64_t resolve_seed(std::uint64_t default_seed) {
  if (const char* env = std::getenv("LAENET_SEED"))
    return std::strtoull(env, nullptr, 10);
  return default_seed;
}

}  // namespace laenet

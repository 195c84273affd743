#include <catch2/catch_amalgamated.hpp>

#include "laenet/rng.hpp"
#include "laenet/scenario.hpp"

using namespace laenet;

TEST_CASE("dB and dBm conversions") {
  CHECK(db_to_linear(0.0) == 1.0);
  CHECK_THAT(db_to_linear(-50.0), Catch::Matchers::WithinRel(1e-5, 1e-12));
  CHECK_THAT(dbm_to_watts(-100.0), Catch::Matchers::WithinRel(1e-13, 1e-12));
  for (double x : {1e-13, 2.5e-7, 1.0, 42.0}) {
    CHECK_THAT(db_to_linear(linear_to_db(x)), Catch::Matchers::WithinRel(x, 1e-12));
    CHECK_THAT(dbm_to_watts(watts_to_dbm(x)), Catch::Matchers::WithinRel(x, 1e-12));
  }
}

TEST_CASE("default scenario matches the experiment constants") {
  const Scenario s = default_scenario();
  CHECK(s.users.size() == 4);
  CHECK_THAT(s.chan.noise_w(), Catch::Matchers::WithinRel(1e-13, 1e-12));
  CHECK_THAT(s.chan.beta0_lin(), Catch::Matchers::WithinRel(1e-5, 1e-12));
  CHECK(s.users[0].p_max_w == 0.1);
  CHECK(s.users[0].bandwidth_hz == 1e6);
  CHECK(s.phys.slot_len_s == 1.0);
  CHECK(s.phys.horizon_slots == 50);
  CHECK(s.phys.h_min_m == 50.0);
  CHECK(s.phys.h_max_m == 300.0);
  CHECK(s.uav_start == Vec3{-500.0, -500.0, 150.0});
  CHECK(s.chan.a_los == 4.88);
  CHECK(s.chan.b_los == 0.43);
  CHECK(s.t_down_s == 0.1);
  CHECK(s.zeta == 0.0);
}

TEST_CASE("config round-trips byte-identically") {
  const Scenario s = default_scenario();
  const std::string text = save_scenario(s);
  const Scenario loaded = load_scenario(text);
  CHECK(save_scenario(loaded) == text);
  CHECK(loaded.users.size() == s.users.size());
  CHECK(loaded.users[1].pos_m == s.users[1].pos_m);
}

TEST_CASE("config validation names the violated field") {
  std::string text = save_scenario(default_scenario());

  SECTION("inverted altitude band") {
    Json j = Json::parse(text);
    j["phys"]["h_min_m"] = 300.0;
    j["phys"]["h_max_m"] = 50.0;
    CHECK_THROWS_WITH(load_scenario(j.dump()),
                      Catch::Matchers::ContainsSubstring("h_min < h_max"));
  }
  SECTION("negative zeta") {
    Json j = Json::parse(text);
    j["zeta"] = -1.0;
    CHECK_THROWS_WITH(load_scenario(j.dump()), Catch::Matchers::ContainsSubstring("zeta"));
  }
  SECTION("unknown keys are rejected") {
    Json j = Json::parse(text);
    j["not_a_key"] = 1;
    CHECK_THROWS_WITH(load_scenario(j.dump()),
                      Catch::Matchers::ContainsSubstring("unknown key"));
  }
  SECTION("malformed document reports a parse error") {
    CHECK_THROWS_WITH(load_scenario("{ nope"), Catch::Matchers::ContainsSubstring("parse error"));
  }
}

TEST_CASE("rng streams are reproducible and independent") {
  RngStream a(42, "fading");
  RngStream b(42, "fading");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, "policy");
  RngStream d(42, "fading");
  bool all_equal = true;
  for (int i = 0; i < 10; ++i)
    if (c.next_u64() != d.next_u64()) all_equal = false;
  CHECK_FALSE(all_equal);
}

TEST_CASE("uniform01 stays in range and covers the interval") {
  RngStream rng(7, "test");
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "laenet/uplink.hpp"

using namespace laenet;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("simulate_upload") {
  SECTION("single-slot fractional completion") {
    const std::array<double, 5> rates{1e7, 1e7, 1e7, 1e7, 1e7};
    const UploadResult r = simulate_upload(8e6, rates, 1.0);
    REQUIRE(r.completion_slot.has_value());
    CHECK(*r.completion_slot == 1);
    CHECK_THAT(r.uplink_time_s, WithinRel(0.8, 1e-12));
    CHECK(r.bits_remaining == 0.0);
  }
  SECTION("empty payload") {
    const std::array<double, 2> rates{1e6, 1e6};
    const UploadResult r = simulate_upload(0.0, rates, 1.0);
    CHECK(r.uplink_time_s == 0.0);
    CHECK(r.bits_remaining == 0.0);
  }
  SECTION("multi-slot with partial final slot") {
    const std::array<double, 3> rates{1e6, 1e6, 1e6};
    const UploadResult r = simulate_upload(2.5e6, rates, 1.0);
    REQUIRE(r.completion_slot.has_value());
    CHECK(*r.completion_slot == 3);
    CHECK_THAT(r.uplink_time_s, WithinRel(2.5, 1e-12));
  }
  SECTION("horizon exhausted is a value, not an error") {
    const std::array<double, 3> rates{1e6, 1e6, 1e6};
    const UploadResult r = simulate_upload(1e7, rates, 1.0);
    CHECK_FALSE(r.completion_slot.has_value());
    CHECK_THAT(r.bits_remaining, WithinRel(7e6, 1e-12));
    CHECK(r.uplink_time_s == 3.0);
  }
  SECTION("constant rate matches exact fractional arithmetic") {
    RngStream rng(3, "uplink");
    for (int trial = 0; trial < 50; ++trial) {
      const double rate = rng.uniform(1e5, 1e7);
      const double payload = rng.uniform(1e5, 5e7);
      const double alpha = rng.uniform(0.1, 2.0);
      std::vector<double> rates(200, rate);
      const UploadResult r = simulate_upload(payload, rates, alpha);
      REQUIRE(r.completion_slot.has_value());
      CHECK_THAT(r.uplink_time_s, WithinRel(payload / rate, 1e-9));
      // completion slot brackets the continuous time
      CHECK(alpha * (*r.completion_slot - 1) < r.uplink_time_s + 1e-12);
      CHECK(r.uplink_time_s <= alpha * *r.completion_slot + 1e-12);
    }
  }
  SECTION("weak monotonicity under dominating rate sequences") {
    RngStream rng(4, "uplink");
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> lo(20), hi(20);
      for (int i = 0; i < 20; ++i) {
        lo[i] = rng.uniform(1e5, 1e6);
        hi[i] = lo[i] + rng.uniform(0.0, 1e6);
      }
      const double payload = rng.uniform(1e5, 1.5e7);
      CHECK(simulate_upload(payload, hi, 1.0).uplink_time_s <=
            simulate_upload(payload, lo, 1.0).uplink_time_s + 1e-12);
    }
  }
  SECTION("cumulative bits at the returned time reproduce the payload") {
    const std::vector<double> rates{2e6, 5e5, 3e6, 1e6};
    const double payload = 4.2e6;
    const UploadResult r = simulate_upload(payload, rates, 1.0);
    REQUIRE(r.completion_slot.has_value());
    double bits = 0.0;
    for (int t = 0; t < *r.completion_slot - 1; ++t) bits += rates[t];
    bits += (r.uplink_time_s - (*r.completion_slot - 1)) * rates[*r.completion_slot - 1];
    CHECK_THAT(bits, WithinRel(payload, 1e-12));
  }
}

TEST_CASE("static uplink time") {
  CHECK_THAT(static_uplink_time(3.36e6, 1e6, 0.1, 1e-9, 1e-13), WithinRel(0.33711, 1e-4));
  CHECK(static_uplink_time(0.0, 1e6, 0.1, 1e-9, 1e-13) == 0.0);
  CHECK_THAT(static_uplink_time(3.36e6, 2e6, 0.1, 1e-9, 1e-13),
             WithinRel(0.5 * static_uplink_time(3.36e6, 1e6, 0.1, 1e-9, 1e-13), 1e-12));

  SECTION("matches slot simulation under a constant rate") {
    const double rate = rate_bps(1e6, snr(0.1, 1e-9, 1e-13));
    std::vector<double> rates(100, rate);
    CHECK_THAT(simulate_upload(3.36e6, rates, 1.0).uplink_time_s,
               WithinAbs(static_uplink_time(3.36e6, 1e6, 0.1, 1e-9, 1e-13), 1e-9));
  }
}

TEST_CASE("total latency") {
  Scenario sc = default_scenario();
  UserTask user = sc.users[2];  // M = 1
  // SNR 1000 chain: 0.42 MB at 384p, 20 tokens
  const double total = total_latency(sc, user, 384 * 384, 0.1, 1e-9);
  CHECK_THAT(total, WithinRel(0.33711 + 0.84034 + 0.1, 1e-4));

  SECTION("huge power approaches the processing-plus-download floor") {
    // rate grows only logarithmically in power, so a small uplink share remains
    const double floor = sc.profile.proc_time_s(384 * 384, 20.0) + 0.1;
    const double near_floor = total_latency(sc, user, 384 * 384, 1e12, 1e-9);
    CHECK(near_floor > floor);
    CHECK_THAT(near_floor, WithinAbs(floor, 0.1));
    CHECK(total_latency(sc, user, 384 * 384, 1e30, 1e-9) < near_floor);
  }
}

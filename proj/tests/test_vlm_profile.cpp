#include <catch2/catch_amalgamated.hpp>

#include "laenet/vlm_profile.hpp"

using namespace laenet;
using Catch::Matchers::WithinRel;

TEST_CASE("default profile lookups") {
  const ResolutionProfile p = default_profile();
  CHECK(p.accuracy(384 * 384) == 0.5963);
  CHECK(p.accuracy(1024 * 1024) == 0.6711);
  CHECK(p.speed(1536 * 1536) == 12.6);
  CHECK(p.payload_mb(768 * 768) == 1.68);
  // mid-table payloads follow pixel-proportional scaling from the 384p row
  CHECK_THAT(p.payload_mb(768 * 768),
             WithinRel(0.42 * (768.0 * 768.0) / (384.0 * 384.0), 1e-12));
  CHECK_THROWS_AS(p.accuracy(512 * 512), std::out_of_range);
}

TEST_CASE("processing time") {
  const ResolutionProfile p = default_profile();
  CHECK_THAT(p.proc_time_s(384 * 384, 20.0), WithinRel(20.0 / 23.8, 1e-12));
  CHECK_THAT(p.proc_time_s(1536 * 1536, 20.0), WithinRel(1.58730, 1e-4));
  CHECK(p.proc_time_s(768 * 768, 0.0) == 0.0);
}

TEST_CASE("payload bits") {
  const ResolutionProfile p = default_profile();
  CHECK_THAT(p.payload_bits(384 * 384, 1), WithinRel(3.36e6, 1e-12));
  CHECK(p.payload_bits(384 * 384, 2) == 2.0 * p.payload_bits(384 * 384, 1));
  CHECK_THAT(p.payload_bits(1536 * 1536, 1), WithinRel(5.392e7, 1e-12));
  CHECK_THROWS_AS(p.payload_bits(384 * 384, 0), std::invalid_argument);
}

TEST_CASE("minimum feasible resolution") {
  const ResolutionProfile p = default_profile();
  CHECK(p.min_feasible_resolution(0.60) == 768 * 768);
  CHECK(p.min_feasible_resolution(0.67) == 1024 * 1024);
  CHECK(p.min_feasible_resolution(0.0) == 384 * 384);
  CHECK_THROWS_WITH(p.min_feasible_resolution(0.70),
                    Catch::Matchers::ContainsSubstring("C1"));

  SECTION("monotone in the accuracy floor") {
    std::int64_t prev = 0;
    for (double acc = 0.0; acc <= 0.6796; acc += 0.01) {
      const std::int64_t r = p.min_feasible_resolution(acc);
      REQUIRE(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("profile table invariants are enforced") {
  auto rows = default_profile().entries();
  SECTION("decreasing accuracy rejected") {
    rows[1].accuracy = 0.50;
    CHECK_THROWS_AS(ResolutionProfile(rows), std::invalid_argument);
  }
  SECTION("non-increasing pixels rejected") {
    rows[1].pixels = rows[0].pixels;
    CHECK_THROWS_AS(ResolutionProfile(rows), std::invalid_argument);
  }
  SECTION("zero speed rejected") {
    rows[2].speed_tok_s = 0.0;
    CHECK_THROWS_AS(ResolutionProfile(rows), std::invalid_argument);
  }
  SECTION("empty profile rejected") {
    CHECK_THROWS_AS(ResolutionProfile({}), std::invalid_argument);
  }
}

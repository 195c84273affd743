#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "laenet/arpo.hpp"

using namespace laenet;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ArpoInstance small_instance(std::vector<ArpoUser> users, double zeta) {
  ArpoInstance inst;
  inst.users = std::move(users);
  inst.noise_w = 1e-13;
  inst.zeta = zeta;
  return inst;
}

ArpoUser user_at_gain(int id, double gain, double acc_min = 0.0, int queries = 1) {
  return {id, acc_min, queries, 1e6, gain, 0.1};
}

// Objective of the power subproblem evaluated directly.
double p2_objective(const ArpoInstance& inst, const std::vector<std::int64_t>& res,
                    const std::vector<double>& powers) {
  double max_lat = 0.0, sum_p = 0.0;
  for (std::size_t n = 0; n < inst.users.size(); ++n) {
    max_lat = std::max(max_lat, inst.user_latency(n, res[n], powers[n]));
    sum_p += powers[n];
  }
  return max_lat + inst.zeta * sum_p;
}

}  // namespace

TEST_CASE("g_n basics") {
  const double D = 3.36e6, B = 1e6, h = 1e-9, s2 = 1e-13;
  SECTION("matches a central finite difference of the latency") {
    const double P = 0.05, delta = 1e-6;
    auto latency = [&](double p) { return static_uplink_time(D, B, p, h, s2); };
    const double fd = (latency(P - delta) - latency(P + delta)) / (2.0 * delta);
    const double g = g_n(P, D, B, h, s2);
    CHECK_THAT(g, WithinRel(fd, 1e-6));
  }
  SECTION("positive and strictly decreasing in P") {
    double prev = std::numeric_limits<double>::infinity();
    for (double p = 0.01; p <= 0.1001; p += 0.01) {
      const double g = g_n(p, D, B, h, s2);
      REQUIRE(g > 0.0);
      REQUIRE(g < prev);
      prev = g;
    }
  }
  CHECK_THROWS_AS(g_n(0.0, D, B, h, s2), std::domain_error);
}

TEST_CASE("power_for_tau closed form") {
  const double D = 3.36e6, B = 1e6, h = 1e-9, s2 = 1e-13;
  // exponent D/(B*(tau-Gamma)) = 1 when tau - Gamma = 3.36 s
  CHECK_THAT(power_for_tau(3.36, D, B, h, s2, 0.0), WithinRel(1e-4, 1e-12));
  CHECK_THAT(power_for_tau(1.0, D, B, h, s2, 0.0),
             WithinRel(1e-4 * (std::exp2(3.36) - 1.0), 1e-12));
  CHECK_THROWS_AS(power_for_tau(0.5, D, B, h, s2, 0.5), std::domain_error);

  SECTION("inverts the latency curve") {
    ArpoInstance inst = small_instance({user_at_gain(0, 1e-9)}, 500.0);
    for (std::int64_t res : {384 * 384, 768 * 768, 1536 * 1536}) {
      const double gamma = inst.gamma_s(res);
      for (double tau : {gamma + 0.5, gamma + 2.0, gamma + 10.0}) {
        const double p = power_for_tau(tau, inst.payload_bits(0, res), 1e6, 1e-9, 1e-13, gamma);
        CHECK_THAT(inst.user_latency(0, res, p), WithinRel(tau, 1e-9));
      }
    }
  }
}

TEST_CASE("solve_tau") {
  ArpoInstance inst = small_instance(
      {user_at_gain(0, 1e-9), user_at_gain(1, 5e-10, 0.65), user_at_gain(2, 2e-9, 0.6, 2)},
      500.0);
  const auto res = scan_resolutions(inst);

  SECTION("stationarity residual vanishes") {
    const double tau = solve_tau(inst, res);
    double sum = 0.0;
    for (std::size_t n = 0; n < inst.users.size(); ++n) {
      const double p = power_for_tau(tau, inst.payload_bits(n, res[n]),
                                     inst.users[n].bandwidth_hz, inst.users[n].gain,
                                     inst.noise_w, inst.gamma_s(res[n]));
      sum += inst.zeta / g_n(p, inst.payload_bits(n, res[n]), inst.users[n].bandwidth_hz,
                             inst.users[n].gain, inst.noise_w);
    }
    CHECK_THAT(sum, WithinAbs(1.0, 1e-6));
  }

  SECTION("residual sum is strictly decreasing in tau") {
    double gamma_max = 0.0;
    for (std::size_t n = 0; n < inst.users.size(); ++n)
      gamma_max = std::max(gamma_max, inst.gamma_s(res[n]));
    double prev = std::numeric_limits<double>::infinity();
    for (double tau = gamma_max + 0.2; tau < gamma_max + 30.0; tau += 0.2) {
      const double s = laenet::detail::stationarity_sum(inst, res, tau);
      REQUIRE(s < prev);
      prev = s;
    }
  }

  SECTION("single-user tau matches a dense grid of the scalarized objective") {
    ArpoInstance one = small_instance({user_at_gain(0, 1e-9)}, 500.0);
    const std::vector<std::int64_t> r{384 * 384};
    const double tau = solve_tau(one, r);
    const double gamma = one.gamma_s(r[0]);
    double best_tau = 0.0, best_obj = std::numeric_limits<double>::infinity();
    const double lo = gamma + 1e-4, hi = gamma + 20.0;
    const int grid = 1000000;
    for (int i = 0; i < grid; ++i) {
      const double t = lo + (hi - lo) * i / (grid - 1);
      const double p = power_for_tau(t, one.payload_bits(0, r[0]), 1e6, 1e-9, 1e-13, gamma);
      const double obj = t + one.zeta * p;
      if (obj < best_obj) {
        best_obj = obj;
        best_tau = t;
      }
    }
    CHECK_THAT(tau, WithinAbs(best_tau, 2.0 * (hi - lo) / (grid - 1)));
  }

  SECTION("tau grows with zeta") {
    double prev = 0.0;
    for (double z : {100.0, 500.0, 1000.0}) {
      ArpoInstance i2 = inst;
      i2.zeta = z;
      const double tau = solve_tau(i2, res);
      REQUIRE(tau > prev);
      prev = tau;
    }
  }
}

TEST_CASE("resolution selection") {
  SECTION("named thresholds") {
    ArpoInstance inst =
        small_instance({user_at_gain(0, 1e-9, 0.60), user_at_gain(1, 1e-9, 0.67)}, 0.0);
    const auto res = select_resolutions(inst);
    CHECK(res == std::vector<std::int64_t>{768 * 768, 1024 * 1024});
  }
  SECTION("unconstrained users get the table minimum") {
    ArpoInstance inst = small_instance({user_at_gain(0, 1e-9), user_at_gain(1, 2e-9)}, 0.0);
    CHECK(select_resolutions(inst) == std::vector<std::int64_t>{384 * 384, 384 * 384});
  }
  SECTION("infeasible accuracy names the user") {
    ArpoInstance inst = small_instance({user_at_gain(0, 1e-9, 0.9)}, 0.0);
    CHECK_THROWS_WITH(arpo_solve(inst), Catch::Matchers::ContainsSubstring("user 0"));
  }
  SECTION("B&B equals exhaustive enumeration on random instances") {
    RngStream rng(11, "arpo");
    const auto& rows = default_profile().entries();
    for (int trial = 0; trial < 10; ++trial) {
      ArpoInstance inst = small_instance({user_at_gain(0, rng.uniform(1e-10, 1e-8)),
                                          user_at_gain(1, rng.uniform(1e-10, 1e-8)),
                                          user_at_gain(2, rng.uniform(1e-10, 1e-8))},
                                         rng.uniform(100.0, 1000.0));
      for (auto& u : inst.users) u.acc_min = rng.uniform(0.0, 0.6796);
      const auto picked = select_resolutions(inst);
      // enumerate all feasible assignments in the 4^3 product space
      std::vector<std::int64_t> best;
      double best_obj = std::numeric_limits<double>::infinity();
      for (const auto& r0 : rows)
        for (const auto& r1 : rows)
          for (const auto& r2 : rows) {
            if (r0.accuracy < inst.users[0].acc_min || r1.accuracy < inst.users[1].acc_min ||
                r2.accuracy < inst.users[2].acc_min)
              continue;
            const std::vector<std::int64_t> r{r0.pixels, r1.pixels, r2.pixels};
            const double obj = solve_powers(inst, r).objective;
            if (obj < best_obj) {
              best_obj = obj;
              best = r;
            }
          }
      CHECK(picked == best);
    }
  }
}

TEST_CASE("arpo_solve") {
  SECTION("zeta = 0 saturates every power") {
    ArpoInstance inst =
        small_instance({user_at_gain(0, 1e-9, 0.6), user_at_gain(1, 4e-10)}, 0.0);
    const ArpoSolution sol = arpo_solve(inst);
    for (double p : sol.power_per_user) CHECK(p == 0.1);
    CHECK(sol.tau_star == sol.objective);  // no power cost
  }

  SECTION("unclamped users sit exactly at tau*") {
    // strong gains so P(tau*) stays below P_max
    ArpoInstance inst =
        small_instance({user_at_gain(0, 1e-8), user_at_gain(1, 6e-9), user_at_gain(2, 2e-8)},
                       200.0);
    const ArpoSolution sol = arpo_solve(inst);
    for (std::size_t n = 0; n < inst.users.size(); ++n) {
      REQUIRE_FALSE(sol.clamp_flags[n]);
      CHECK_THAT(sol.achieved_latency_s[n], WithinRel(sol.tau_star, 1e-6));
    }
    double omega_sum = 0.0;
    for (double w : sol.omega) omega_sum += w;
    CHECK_THAT(omega_sum, WithinAbs(1.0, 1e-6));
  }

  SECTION("matches a 2-D brute-force power grid") {
    RngStream rng(21, "arpo");
    for (int trial = 0; trial < 3; ++trial) {
      ArpoInstance inst = small_instance({user_at_gain(0, rng.uniform(5e-10, 5e-9)),
                                          user_at_gain(1, rng.uniform(5e-10, 5e-9))},
                                         rng.uniform(100.0, 1000.0));
      const ArpoSolution sol = arpo_solve(inst);
      const auto& res = sol.res_per_user;
      const int grid = 1000;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 1; i <= grid; ++i)
        for (int j = 1; j <= grid; ++j) {
          const std::vector<double> p{0.1 * i / grid, 0.1 * j / grid};
          best = std::min(best, p2_objective(inst, res, p));
        }
      // ARPO is continuous, the grid is not: allow one grid cell of slack
      CHECK(sol.objective <= best + 1e-9);
      CHECK(best - sol.objective < 0.5);
    }
  }

  SECTION("zeta sweep: power falls, latency rises") {
    ArpoInstance inst =
        small_instance({user_at_gain(0, 1e-9), user_at_gain(1, 4e-10, 0.62)}, 0.0);
    double prev_power = std::numeric_limits<double>::infinity();
    double prev_lat = 0.0;
    for (double z : {100.0, 300.0, 500.0, 700.0, 1000.0}) {
      inst.zeta = z;
      const ArpoSolution sol = arpo_solve(inst);
      double sum_p = 0.0, max_lat = 0.0;
      for (std::size_t n = 0; n < 2; ++n) {
        sum_p += sol.power_per_user[n];
        max_lat = std::max(max_lat, sol.achieved_latency_s[n]);
      }
      REQUIRE(sum_p <= prev_power + 1e-12);
      REQUIRE(max_lat >= prev_lat - 1e-12);
      prev_power = sum_p;
      prev_lat = max_lat;
    }
  }
}

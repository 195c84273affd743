#pragma once

#include <cmath>
#include <stdexcept>

#include "laenet/rng.hpp"
#include "laenet/scenario.hpp"
#include "laenet/vec3.hpp"

namespace laenet {

struct LinkGeometry {
  double dist_m = 0.0;
  double elev_deg = 0.0;
  double horiz_dist_m = 0.0;
};

struct ChannelSample {
  double mean_gain = 0.0;     // elevation-averaged large-scale gain
  double fading_power = 1.0;  // |h_hat|^2
  double gain = 0.0;          // mean_gain * fading_power
};

inline LinkGeometry geometry(const Vec3& uav, const Vec3& user) {
  LinkGeometry g;
  const Vec3 d = uav - user;
  g.horiz_dist_m = d.norm_xy();
  g.dist_m = d.norm();
  g.elev_deg = (g.horiz_dist_m == 0.0)
                   ? (d.z >= 0.0 ? 90.0 : -90.0)
                   : std::atan(d.z / g.horiz_dist_m) * 180.0 / M_PI;
  return g;
}

// Elevation-dependent LoS probability, theta in degrees.
inline double los_probability(double elev_deg, double a, double b) {
  return 1.0 / (1.0 + a * std::exp(-b * (elev_deg - a)));
}

// LoS/NLoS-averaged path gain at the link geometry.
inline double mean_gain(const LinkGeometry& geom, const ChannelConfig& cfg) {
  if (geom.dist_m <= 0.0) throw std::domain_error("co-located link: distance is zero");
  const double p = los_probability(geom.elev_deg, cfg.a_los, cfg.b_los);
  const double beta0 = cfg.beta0_lin();
  const double g_los = beta0 / std::pow(geom.dist_m, cfg.gamma_los);
  const double g_nlos = beta0 / std::pow(geom.dist_m, cfg.gamma_nlos);
  return p * g_los + (1.0 - p) * g_nlos;
}

// |h_hat|^2; unit-modulus is the deterministic default, rayleigh draws an
// exponential with mean 1.
inline double sample_fading(FadingMode mode, RngStream& rng) {
  switch (mode) {
    case FadingMode::UnitModulus: return 1.0;
    case FadingMode::Rayleigh: return rng.exponential();
  }
  throw std::logic_error("unreachable fading mode");
}

inline ChannelSample sample_channel(const Vec3& uav, const Vec3& user, const ChannelConfig& cfg,
                                    RngStream& rng) {
  ChannelSample s;
  s.mean_gain = mean_gain(geometry(uav, user), cfg);
  s.fading_power = sample_fading(cfg.fading_mode, rng);
  s.gain = s.mean_gain * s.fading_power;
  return s;
}

inline double snr(double p_w, double gain, double noise_w) { return p_w * gain / noise_w; }

inline double rate_bps(double bandwidth_hz, double snr_ratio) {
  return bandwidth_hz * std::log2(1.0 + snr_ratio);
}

}  // namespace laenet

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "laenet/channel.hpp"
#include "laenet/scenario.hpp"

namespace laenet {

struct UploadResult {
  std::optional<int> completion_slot;  // 1-based; nullopt if horizon exhausted
  double uplink_time_s = 0.0;
  double bits_remaining = 0.0;
};

// Slot-varying upload: completion index is the first slot whose cumulative
// throughput covers the payload; the final slot is counted fractionally.
inline UploadResult simulate_upload(double payload_bits, std::span<const double> rate_per_slot,
                                    double slot_len_s) {
  if (payload_bits < 0.0) throw std::invalid_argument("payload_bits must be >= 0");
  UploadResult r;
  if (payload_bits == 0.0) {
    r.completion_slot = 1;
    return r;
  }
  double sent = 0.0;
  for (std::size_t t = 0; t < rate_per_slot.size(); ++t) {
    const double slot_bits = slot_len_s * rate_per_slot[t];
    if (sent + slot_bits >= payload_bits) {
      r.completion_slot = static_cast<int>(t) + 1;
      r.uplink_time_s =
          slot_len_s * static_cast<double>(t) + (payload_bits - sent) / rate_per_slot[t];
      return r;
    }
    sent += slot_bits;
  }
  r.uplink_time_s = slot_len_s * static_cast<double>(rate_per_slot.size());
  r.bits_remaining = payload_bits - sent;
  return r;
}

// Quasi-static closed form: channel frozen at the session-start pose.
inline double static_uplink_time(double payload_bits, double bandwidth_hz, double p_w, double gain,
                                 double noise_w) {
  if (payload_bits == 0.0) return 0.0;
  const double rate = rate_bps(bandwidth_hz, snr(p_w, gain, noise_w));
  if (rate <= 0.0) throw std::domain_error("zero uplink rate: latency is unbounded");
  return payload_bits / rate;
}

// Upload + inference + fixed downlink.
inline double total_latency(const Scenario& sc, const UserTask& user, std::int64_t res_pixels,
                            double p_w, double gain) {
  const double bits = sc.profile.payload_bits(res_pixels, user.n_queries);
  const double t_up = static_uplink_time(bits, user.bandwidth_hz, p_w, gain, sc.chan.noise_w());
  return t_up + sc.profile.proc_time_s(res_pixels, sc.expected_out_tokens) + sc.t_down_s;
}

}  // namespace laenet

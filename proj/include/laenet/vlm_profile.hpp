#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace laenet {

// Empirical resolution profile: each row maps an input resolution to the
// measured VQA accuracy, decoder speed and uplink payload per query.
struct ProfileEntry {
  std::string label;        // e.g. "384p"
  std::int64_t pixels = 0;  // H*W
  double accuracy = 0.0;    // fraction in [0,1]
  double speed_tok_s = 0.0; // decoder tokens/s
  double payload_mb = 0.0;  // MB per query, decimal (1 MB = 1e6 bytes)
};

class ResolutionProfile {
 public:
  explicit ResolutionProfile(std::vector<ProfileEntry> entries)
      : entries_(std::move(entries)) {
    validate();
  }

  const std::vector<ProfileEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const ProfileEntry& at_pixels(std::int64_t pixels) const {
    for (const auto& e : entries_)
      if (e.pixels == pixels) return e;
    throw std::out_of_range("unknown resolution: " + std::to_string(pixels) + " pixels");
  }

  double accuracy(std::int64_t pixels) const { return at_pixels(pixels).accuracy; }
  double speed(std::int64_t pixels) const { return at_pixels(pixels).speed_tok_s; }
  double payload_mb(std::int64_t pixels) const { return at_pixels(pixels).payload_mb; }

  // Inference time for the expected answer length at this resolution.
  double proc_time_s(std::int64_t pixels, double expected_tokens) const {
    return expected_tokens / at_pixels(pixels).speed_tok_s;
  }

  // Uplink payload in bits for n_queries queries (image dominates, text
  // neglected). Decimal MB: 1 MB = 8e6 bits.
  double payload_bits(std::int64_t pixels, int n_queries) const {
    if (n_queries < 1) throw std::invalid_argument("n_queries must be >= 1");
    return at_pixels(pixels).payload_mb * 8e6 * n_queries;
  }

  // Smallest resolution meeting the accuracy floor (constraint on the
  // discrete candidate set; no interpolation).
  std::int64_t min_feasible_resolution(double acc_min) const {
    for (const auto& e : entries_)
      if (e.accuracy >= acc_min) return e.pixels;
    throw std::runtime_error(
        "accuracy requirement " + std::to_string(acc_min) +
        " infeasible (C1): profile maximum is " + std::to_string(entries_.back().accuracy));
  }

 private:
  void validate() const {
    if (entries_.empty()) throw std::invalid_argument("profile must be non-empty");
    for (const auto& e : entries_) {
      if (e.pixels <= 0) throw std::invalid_argument("pixels must be positive");
      if (e.accuracy < 0.0 || e.accuracy > 1.0)
        throw std::invalid_argument("accuracy out of [0,1] at " + e.label);
      if (e.speed_tok_s <= 0.0) throw std::invalid_argument("speed must be > 0 at " + e.label);
      if (e.payload_mb <= 0.0) throw std::invalid_argument("payload must be > 0 at " + e.label);
    }
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      const auto& a = entries_[i - 1];
      const auto& b = entries_[i];
      if (b.pixels <= a.pixels)
        throw std::invalid_argument("pixels must be strictly increasing");
      if (b.accuracy < a.accuracy)
        throw std::invalid_argument("accuracy must be non-decreasing in pixels");
      if (b.speed_tok_s > a.speed_tok_s)
        throw std::invalid_argument("speed must be non-increasing in pixels");
      if (b.payload_mb <= a.payload_mb)
        throw std::invalid_argument("payload must be strictly increasing in pixels");
    }
  }

  std::vector<ProfileEntry> entries_;
};

// LLaVA-HR profiling table. Payloads for the two middle rows follow
// pixel-proportional scaling anchored at the measured 384p endpoint.
inline ResolutionProfile default_profile() {
  return ResolutionProfile({
      {"384p", 384 * 384, 0.5963, 23.8, 0.42},
      {"768p", 768 * 768, 0.6436, 19.9, 1.68},
      {"1024p", 1024 * 1024, 0.6711, 19.7, 2.99},
      {"1536p", 1536 * 1536, 0.6796, 12.6, 6.74},
  });
}

}  // namespace laenet

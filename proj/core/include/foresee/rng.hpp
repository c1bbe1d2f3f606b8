#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace foresee {

// Deterministic random stream keyed by (seed, purpose). Identical keys replay the
// same draw sequence; distinct purposes decorrelate. All distributions are derived
// from the raw 64-bit stream in-house so sequences are stable across platforms.
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view purpose);

  uint64_t next_u64();
  double uniform();              // [0, 1)
  double normal();               // standard normal, Box-Muller
  int uniform_int(int n);        // [0, n)

  uint64_t seed() const { return seed_; }
  const std::string& purpose() const { return purpose_; }

 private:
  uint64_t state_;
  uint64_t seed_;
  std::string purpose_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace foresee

#include "foresee/rng.hpp"

#include <cmath>
#include <numbers>

namespace foresee {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(uint64_t seed, std::string_view purpose)
    : seed_(seed), purpose_(purpose) {
  uint64_t mix = seed ^ fnv1a(purpose);
  // burn a few rounds so nearby seeds diverge
  state_ = mix;
  for (int i = 0; i < 4; ++i) splitmix64(state_);
}

uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform() {
  return (double)(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

int RngStream::uniform_int(int n) {
  // rejection sampling, unbiased
  uint64_t bound = UINT64_MAX - UINT64_MAX % (uint64_t)n;
  uint64_t x = next_u64();
  while (x >= bound) x = next_u64();
  return (int)(x % (uint64_t)n);
}

}  // namespace foresee

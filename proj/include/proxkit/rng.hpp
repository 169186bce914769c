#pragma once

#include <cstdint>
#include <random>

namespace proxkit {

uint64_t splitmix64(uint64_t z);

// Replication seed: splitmix64(splitmix64(splitmix64(base) ^ n) ^ rep).
uint64_t mix_seed(uint64_t base, uint64_t n, uint64_t rep);

// mt19937_64 (bit-portable per the standard) with a hand-rolled Box-Muller
// gaussian, since std::normal_distribution is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // (k + 0.5) / 2^53 on the open interval (0, 1).
  double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double gauss();

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace proxkit

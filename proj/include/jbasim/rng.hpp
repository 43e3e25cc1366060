#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace jbasim {

// Deterministic substream RNG. Every Monte-Carlo consumer derives its own
// stream from (master seed, integer path), so results never depend on thread
// scheduling or evaluation order. Engine: xoshiro256++ seeded via splitmix64.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Collapses (master, id0, id1, ...) into one 64-bit stream key.
inline std::uint64_t derive_stream_key(std::uint64_t master,
                                       std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master;
  std::uint64_t key = splitmix64_next(s);
  for (std::uint64_t id : path) {
    s = key ^ (id + 0x9e3779b97f4a7c15ULL);
    key = splitmix64_next(s);
    key = splitmix64_next(s) ^ (key << 1 | key >> 63);
  }
  return key;
}

class Rng {
 public:
  explicit Rng(std::uint64_t stream_key) {
    std::uint64_t s = stream_key;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  Rng(std::uint64_t master, std::initializer_list<std::uint64_t> path)
      : Rng(derive_stream_key(master, path)) {}

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Strictly positive uniform, safe as a log argument.
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Box-Muller; the spare is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace jbasim

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "mmlda/errors.hpp"

namespace mmlda {

// splitmix64 finalizer; used to derive independent seed streams from
// (base seed, stream tag) pairs so parallel work items stay reproducible
// regardless of scheduling.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ mix_seed(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b) ^ mix_seed(c ^ 0xa5a5a5a5a5a5a5a5ULL));
}

// FNV-1a; stable across platforms, unlike std::hash
inline std::uint64_t hash_id(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  // index drawn proportionally to nonnegative weights w[0..k)
  int categorical(const double* w, int k) {
    double total = 0.0;
    for (int i = 0; i < k; ++i) total += w[i];
    if (!(total > 0.0)) throw InternalError("categorical: nonpositive weight total");
    double u = uniform01() * total;
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return k - 1;  // guards against accumulated rounding
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mmlda

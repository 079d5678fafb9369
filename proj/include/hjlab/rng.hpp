#pragma once

#include <cstdint>
#include <limits>

namespace hjlab {

//! The splitmix64 finalizer. A bijective avalanche mix on 64-bit words.
inline constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

//! Folds @a value into the running key @a key. Order matters, so
//! (a, b) and (b, a) give different keys.
inline constexpr std::uint64_t HashCombine(std::uint64_t key,
                                           std::uint64_t value) {
  return Mix64(key ^ Mix64(value + kGolden));
}

//! Stream tags so that the X, Y, shift, and bookkeeping draws never
//! share a key.
enum class Stream : std::uint64_t {
  kX = 0x58,
  kY = 0x59,
  kShift = 0x54,
  kRealization = 0x52,
  kBootstrap = 0x42,
  kPlant = 0x50,
  kDatum = 0x44,
};

//! Counter-based generator. Every value is a pure function of
//! (key, counter), so draws are reproducible regardless of which worker
//! produces them. Satisfies UniformRandomBitGenerator.
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr KeyedRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() {
    counter_ += kGolden;
    return Mix64(key_ + counter_);
  }

  //! Uniform double in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

//! Seed of realization @a index under master seed @a master.
inline constexpr std::uint64_t RealizationSeed(std::uint64_t master,
                                               std::uint64_t index) {
  return HashCombine(HashCombine(master, static_cast<std::uint64_t>(
                                             Stream::kRealization)),
                     index);
}

}  // namespace hjlab

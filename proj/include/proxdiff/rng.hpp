#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

#include <Eigen/Core>

namespace proxdiff {

// SplitMix64 finalizer; full avalanche on 64 bits.
inline constexpr std::uint64_t avalanche64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Counter-based generator. The draw sequence is a pure function of the key
// words the generator was constructed with, so any consumer that derives its
// key from (master seed, chain index, step index, ...) gets a reproducible
// stream independent of evaluation order or threading.
class CounterRng {
 public:
  explicit CounterRng(std::initializer_list<std::uint64_t> key_words) {
    std::uint64_t h = 0x243F6A8885A308D3ull;  // first words of pi
    for (std::uint64_t w : key_words) {
      h = avalanche64((h + 0x9E3779B97F4A7C15ull) ^ (w * 0xD1B54A32D192ED03ull));
    }
    key_ = h;
  }

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    return avalanche64(key_ ^ counter_);
  }

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // One standard normal via Box-Muller (the second value is discarded to keep
  // the stream layout independent of call parity).
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::VectorXd normal_vec(Eigen::Index d) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  // Uniform integer in [0, n). Modulo bias is ~n / 2^64, irrelevant here.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace proxdiff

#pragma once

#include <wlasso/common.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace wlasso {

/**
 * Philox4x32-10 counter-based generator (Salmon et al., SC'11).
 * A stream is identified by (seed, substream); the draw index is the low counter words,
 * so replicate k of an experiment always sees the same numbers on every platform.
 */
class Philox4x32 {
 public:
  Philox4x32(std::uint64_t seed, std::uint64_t substream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        hi_{static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32)} {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = generate(counter_++);
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t a = next_u32();
    return (a << 32) | next_u32();
  }

  // Uniform on (0,1), 53 random bits, never exactly 0 or 1.
  double uniform() {
    std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  double poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("poisson mean must be finite and nonnegative");
    if (mean == 0.0) return 0.0;
    if (mean < 30.0) {
      // inversion by sequential search
      double u = uniform();
      double k = 0.0, pk = std::exp(-mean), cdf = pk;
      while (u > cdf && k < 1000.0) {
        k += 1.0;
        pk *= mean / k;
        cdf += pk;
      }
      return k;
    }
    // PTRS transformed rejection (Hormann 1993)
    const double slam = std::sqrt(mean), loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam, a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4), vr = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
      double u = uniform() - 0.5, v = uniform();
      double us = 0.5 - std::abs(u);
      double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0))
        return k;
    }
  }

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do x = next_u64();
    while (x >= limit);
    return x % bound;
  }

  static std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t substream, std::uint64_t index) {
    Philox4x32 g(seed, substream);
    return g.generate(index);
  }

 private:
  std::array<std::uint32_t, 4> generate(std::uint64_t index) const {
    std::array<std::uint32_t, 4> c{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), hi_[0],
                                   hi_[1]};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return c;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> hi_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Substreams reserved for non-replicate draws.
inline constexpr std::uint64_t kDesignStream = 0xD0000000'00000001ull;
inline constexpr std::uint64_t kTargetStream = 0xD0000000'00000002ull;
inline constexpr std::uint64_t kSearchStream = 0xD0000000'00000003ull;

/**
 * Runs body(k) for k in [0, count) on a pool of threads. Each index writes its own
 * slot, so results do not depend on scheduling.
 */
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += threads) body(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace wlasso

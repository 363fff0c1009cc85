#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spcdi::rng {

// Philox4x32-10, after Salmon et al., "Parallel random numbers: as easy as
// 1, 2, 3" (SC 2011). Counter-based: every draw is a pure function of
// (key, counter), so parallel and serial generation emit identical streams.
// This is the project's single, versioned generator; changing it changes
// every seeded artifact, so don't.

struct Counter {
  uint32_t w0 = 0, w1 = 0, w2 = 0, w3 = 0;
};

namespace detail {

inline void mul_hi_lo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t p = static_cast<uint64_t>(a) * b;
  lo = static_cast<uint32_t>(p);
  hi = static_cast<uint32_t>(p >> 32);
}

inline void philox_round(std::array<uint32_t, 4>& x, uint32_t k0, uint32_t k1) {
  constexpr uint32_t kMul0 = 0xD2511F53u;
  constexpr uint32_t kMul1 = 0xCD9E8D57u;
  uint32_t hi0, lo0, hi1, lo1;
  mul_hi_lo(kMul0, x[0], hi0, lo0);
  mul_hi_lo(kMul1, x[2], hi1, lo1);
  x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
}

}  // namespace detail

inline std::array<uint32_t, 4> philox4x32(uint64_t key, Counter ctr) {
  constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr uint32_t kWeyl1 = 0xBB67AE85u;
  std::array<uint32_t, 4> x{ctr.w0, ctr.w1, ctr.w2, ctr.w3};
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    detail::philox_round(x, k0, k1);
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return x;
}

// Stream tags keep unrelated draws on disjoint counters. Values are part of
// the serialized-seed contract.
enum class Stream : uint32_t {
  binary_pattern = 1,
  gray_pattern = 2,
  noise = 3,
  init_amplitude = 4,
  init_phase = 5,
  shuffle = 6,
  derive = 7,
  object_gen = 8,
};

inline Counter make_counter(Stream s, uint64_t stream_id, uint64_t index, uint32_t attempt = 0) {
  Counter c;
  c.w0 = static_cast<uint32_t>(index);
  c.w1 = static_cast<uint32_t>(index >> 32);
  c.w2 = static_cast<uint32_t>(stream_id);
  c.w3 = (static_cast<uint32_t>(s) << 8) | (attempt & 0xFFu);
  return c;
}

inline uint64_t bits64(uint64_t key, Stream s, uint64_t stream_id, uint64_t index,
                       uint32_t attempt = 0) {
  auto x = philox4x32(key, make_counter(s, stream_id, index, attempt));
  return (static_cast<uint64_t>(x[0]) << 32) | x[1];
}

// Uniform on [0, 1), 53-bit mantissa.
inline double to_unit(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform01(uint64_t key, Stream s, uint64_t stream_id, uint64_t index,
                        uint32_t attempt = 0) {
  return to_unit(bits64(key, s, stream_id, index, attempt));
}

// Standard normal via Box-Muller; one draw consumes one 128-bit block.
inline double gaussian(uint64_t key, Stream s, uint64_t stream_id, uint64_t index) {
  auto x = philox4x32(key, make_counter(s, stream_id, index));
  uint64_t a = (static_cast<uint64_t>(x[0]) << 32) | x[1];
  uint64_t b = (static_cast<uint64_t>(x[2]) << 32) | x[3];
  double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  double u2 = to_unit(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Deterministic sub-seed derivation for harness fan-out.
inline uint64_t derive_seed(uint64_t root, uint32_t salt, uint64_t index) {
  return bits64(root, Stream::derive, salt, index);
}

}  // namespace spcdi::rng

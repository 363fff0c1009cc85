#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spcdi/field.hpp"

namespace spcdi {

enum class PatternKind { Binary, Gray };

// Ordered set of m modulation patterns, side x side each, entries in [0, 1].
// Binary sets are kept bit-packed (LSB-first within a byte, rows padded to
// whole bytes) in the same layout the file format uses; gray sets are dense
// float64. Immutable after generation/load. A pattern is never identically
// zero: Eq-4-style updates divide by |P|^2_max.
class PatternSet {
public:
  PatternKind kind = PatternKind::Binary;
  int side = 0;
  int count = 0;
  uint64_t seed = 0;
  std::vector<uint8_t> packed;   // binary payload, count * side * row_bytes()
  std::vector<double> values;    // gray payload, count * side^2

  long pixels() const { return static_cast<long>(side) * side; }
  int row_bytes() const { return (side + 7) / 8; }
  long pattern_stride_bytes() const { return static_cast<long>(side) * row_bytes(); }

  double value(int k, long p) const;              // entry at row-major pixel p
  double max_abs_sq(int k) const { return max_abs_sq_[k]; }

  // psi = P_k (elementwise) obj; psi is resized to match.
  void modulate(int k, const ComplexField& obj, ComplexField& psi) const;

  void finalize_stats();  // recompute per-pattern |P|^2_max (load/gen path)

private:
  std::vector<double> max_abs_sq_;
};

// Deterministic in (side, m, seed): every entry is an independent Philox
// draw addressed by (seed, pattern, pixel), so generation order is free.
PatternSet gen_binary_patterns(int side, int m, uint64_t seed);
PatternSet gen_gray_patterns(int side, int m, uint64_t seed);

// File format: "SPCDI-PAT v1 <kind> <side> <m> <seed>\n", then the packed
// binary payload or little-endian float64s. Round-trip is bit-exact.
void save_patterns(const PatternSet& set, const std::string& path);
PatternSet load_patterns(const std::string& path);

namespace detail {
// Serial reference twins; must match the OpenMP generators bit for bit.
PatternSet gen_binary_patterns_serial(int side, int m, uint64_t seed);
PatternSet gen_gray_patterns_serial(int side, int m, uint64_t seed);
}  // namespace detail

}  // namespace spcdi

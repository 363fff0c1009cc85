#include "spcdi/patterns.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "spcdi/errors.hpp"
#include "spcdi/philox.hpp"

namespace spcdi {

namespace {

void require_dims(int side, int m, const char* who) {
  if (side < 2) throw std::invalid_argument(std::string(who) + ": side must be >= 2");
  if (m < 1) throw std::invalid_argument(std::string(who) + ": pattern count must be >= 1");
}

// One binary pattern; redraws (fresh counter attempt) if it comes out all
// zero, which Eq-4-style updates cannot digest.
void fill_binary(PatternSet& set, int k) {
  const long stride = set.pattern_stride_bytes();
  uint8_t* base = set.packed.data() + static_cast<std::size_t>(k) * stride;
  const int rb = set.row_bytes();
  for (uint32_t attempt = 0; attempt < 256; ++attempt) {
    std::memset(base, 0, stride);
    bool any = false;
    for (int r = 0; r < set.side; ++r) {
      for (int c = 0; c < set.side; ++c) {
        long p = static_cast<long>(r) * set.side + c;
        if (rng::bits64(set.seed, rng::Stream::binary_pattern, k, p, attempt) & 1u) {
          base[static_cast<long>(r) * rb + c / 8] |= static_cast<uint8_t>(1u << (c % 8));
          any = true;
        }
      }
    }
    if (any) {
      if (attempt > 0)
        std::fprintf(stderr, "spcdi: pattern %d drew all-zero, redrawn (attempt %u)\n", k,
                     attempt);
      return;
    }
  }
  throw std::runtime_error("gen_binary_patterns: could not draw a nonzero pattern");
}

void fill_gray(PatternSet& set, int k) {
  const long n = set.pixels();
  double* base = set.values.data() + static_cast<std::size_t>(k) * n;
  for (uint32_t attempt = 0; attempt < 256; ++attempt) {
    bool any = false;
    for (long p = 0; p < n; ++p) {
      base[p] = rng::uniform01(set.seed, rng::Stream::gray_pattern, k, p, attempt);
      any = any || base[p] > 0.0;
    }
    if (any) {
      if (attempt > 0)
        std::fprintf(stderr, "spcdi: pattern %d drew all-zero, redrawn (attempt %u)\n", k,
                     attempt);
      return;
    }
  }
  throw std::runtime_error("gen_gray_patterns: could not draw a nonzero pattern");
}

template <typename Fill>
PatternSet generate(PatternKind kind, int side, int m, uint64_t seed, bool parallel, Fill fill) {
  PatternSet set;
  set.kind = kind;
  set.side = side;
  set.count = m;
  set.seed = seed;
  if (kind == PatternKind::Binary)
    set.packed.assign(static_cast<std::size_t>(m) * set.pattern_stride_bytes(), 0);
  else
    set.values.assign(static_cast<std::size_t>(m) * set.pixels(), 0.0);

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k) fill(set, k);
  } else {
    for (int k = 0; k < m; ++k) fill(set, k);
  }
  set.finalize_stats();
  return set;
}

}  // namespace

double PatternSet::value(int k, long p) const {
  if (kind == PatternKind::Gray) return values[static_cast<std::size_t>(k) * pixels() + p];
  const int r = static_cast<int>(p / side);
  const int c = static_cast<int>(p % side);
  const uint8_t byte =
      packed[static_cast<std::size_t>(k) * pattern_stride_bytes() + static_cast<long>(r) * row_bytes() + c / 8];
  return (byte >> (c % 8)) & 1u ? 1.0 : 0.0;
}

void PatternSet::modulate(int k, const ComplexField& obj, ComplexField& psi) const {
  if (obj.side != side) throw std::invalid_argument("PatternSet::modulate: side mismatch");
  if (k < 0 || k >= count) throw std::invalid_argument("PatternSet::modulate: bad pattern index");
  psi.side = side;
  psi.data.resize(obj.data.size());
  if (kind == PatternKind::Gray) {
    const double* v = values.data() + static_cast<std::size_t>(k) * pixels();
    for (long p = 0; p < pixels(); ++p) psi.data[p] = v[p] * obj.data[p];
    return;
  }
  const uint8_t* base = packed.data() + static_cast<std::size_t>(k) * pattern_stride_bytes();
  const int rb = row_bytes();
  long p = 0;
  for (int r = 0; r < side; ++r) {
    const uint8_t* row = base + static_cast<long>(r) * rb;
    for (int c = 0; c < side; ++c, ++p)
      psi.data[p] = (row[c / 8] >> (c % 8)) & 1u ? obj.data[p] : cplx{};
  }
}

void PatternSet::finalize_stats() {
  max_abs_sq_.assign(count, 0.0);
  if (kind == PatternKind::Binary) {
    // The no-all-zero rule guarantees a set bit, so the max entry is 1.
    for (int k = 0; k < count; ++k) max_abs_sq_[k] = 1.0;
    return;
  }
  for (int k = 0; k < count; ++k) {
    const double* v = values.data() + static_cast<std::size_t>(k) * pixels();
    double mx = 0.0;
    for (long p = 0; p < pixels(); ++p) mx = std::max(mx, v[p]);
    max_abs_sq_[k] = mx * mx;
  }
}

PatternSet gen_binary_patterns(int side, int m, uint64_t seed) {
  require_dims(side, m, "gen_binary_patterns");
  return generate(PatternKind::Binary, side, m, seed, true, fill_binary);
}

PatternSet gen_gray_patterns(int side, int m, uint64_t seed) {
  require_dims(side, m, "gen_gray_patterns");
  return generate(PatternKind::Gray, side, m, seed, true, fill_gray);
}

namespace detail {

PatternSet gen_binary_patterns_serial(int side, int m, uint64_t seed) {
  require_dims(side, m, "gen_binary_patterns_serial");
  return generate(PatternKind::Binary, side, m, seed, false, fill_binary);
}

PatternSet gen_gray_patterns_serial(int side, int m, uint64_t seed) {
  require_dims(side, m, "gen_gray_patterns_serial");
  return generate(PatternKind::Gray, side, m, seed, false, fill_gray);
}

}  // namespace detail

void save_patterns(const PatternSet& set, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_patterns: cannot open " + path);
  std::fprintf(f, "SPCDI-PAT v1 %s %d %d %llu\n",
               set.kind == PatternKind::Binary ? "binary" : "gray", set.side, set.count,
               static_cast<unsigned long long>(set.seed));
  std::size_t wrote = 0, want = 0;
  if (set.kind == PatternKind::Binary) {
    want = set.packed.size();
    wrote = std::fwrite(set.packed.data(), 1, want, f);
  } else {
    want = set.values.size();
    wrote = std::fwrite(set.values.data(), sizeof(double), want, f);
  }
  std::fclose(f);
  if (wrote != want) throw std::runtime_error("save_patterns: short write to " + path);
}

PatternSet load_patterns(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load_patterns: cannot open " + path);
  char header[128];
  if (!std::fgets(header, sizeof(header), f)) {
    std::fclose(f);
    throw FormatError("load_patterns: missing header in " + path, 0);
  }
  char kind_str[16];
  int side = 0, m = 0;
  unsigned long long seed = 0;
  if (std::sscanf(header, "SPCDI-PAT v1 %15s %d %d %llu", kind_str, &side, &m, &seed) != 4 ||
      side < 2 || m < 1 ||
      (std::strcmp(kind_str, "binary") != 0 && std::strcmp(kind_str, "gray") != 0)) {
    std::fclose(f);
    throw FormatError("load_patterns: bad header in " + path, 0);
  }
  const std::size_t header_len = std::strlen(header);

  PatternSet set;
  set.kind = std::strcmp(kind_str, "binary") == 0 ? PatternKind::Binary : PatternKind::Gray;
  set.side = side;
  set.count = m;
  set.seed = seed;

  std::size_t got = 0, want = 0, unit = 1;
  if (set.kind == PatternKind::Binary) {
    want = static_cast<std::size_t>(m) * set.pattern_stride_bytes();
    set.packed.resize(want);
    got = std::fread(set.packed.data(), 1, want, f);
  } else {
    want = static_cast<std::size_t>(m) * set.pixels();
    unit = sizeof(double);
    set.values.resize(want);
    got = std::fread(set.values.data(), unit, want, f);
  }
  bool extra = false;
  if (got == want) {
    char probe;
    extra = std::fread(&probe, 1, 1, f) == 1;
  }
  std::fclose(f);
  if (got != want)
    throw FormatError("load_patterns: truncated payload in " + path, header_len + got * unit);
  if (extra)
    throw FormatError("load_patterns: trailing bytes in " + path, header_len + want * unit);

  // Integrity checks mirror the type invariants; offsets point at the first
  // offending payload byte.
  if (set.kind == PatternKind::Binary) {
    const int rb = set.row_bytes();
    const int pad_bits = rb * 8 - side;
    const uint8_t pad_mask = pad_bits == 0 ? 0 : static_cast<uint8_t>(0xFFu << (8 - pad_bits));
    for (int k = 0; k < m; ++k) {
      const std::size_t off = static_cast<std::size_t>(k) * set.pattern_stride_bytes();
      bool any = false;
      for (long b = 0; b < set.pattern_stride_bytes(); ++b) {
        uint8_t byte = set.packed[off + b];
        if (pad_mask && (b % rb) == rb - 1 && (byte & pad_mask))
          throw FormatError("load_patterns: nonzero row padding in " + path,
                            header_len + off + b);
        any = any || byte != 0;
      }
      if (!any)
        throw FormatError("load_patterns: all-zero pattern in " + path, header_len + off);
    }
  } else {
    for (std::size_t i = 0; i < set.values.size(); ++i) {
      double v = set.values[i];
      if (!(v >= 0.0) || !(v <= 1.0))
        throw FormatError("load_patterns: gray entry outside [0,1] in " + path,
                          header_len + i * sizeof(double));
    }
    for (int k = 0; k < m; ++k) {
      const double* v = set.values.data() + static_cast<std::size_t>(k) * set.pixels();
      bool any = false;
      for (long p = 0; p < set.pixels() && !any; ++p) any = v[p] > 0.0;
      if (!any)
        throw FormatError("load_patterns: all-zero pattern in " + path,
                          header_len + static_cast<std::size_t>(k) * set.pixels() * sizeof(double));
    }
  }
  set.finalize_stats();
  return set;
}

}  // namespace spcdi

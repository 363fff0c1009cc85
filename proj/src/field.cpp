#include "spcdi/field.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "spcdi/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "field/pattern file formats assume a little-endian host");

namespace spcdi {

namespace {

constexpr double kPi = 3.141592653589793238462643;

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

// The FFTW planner is not thread-safe; executing a cached plan on
// caller-owned buffers is. FFTW_ESTIMATE keeps the algorithm choice (and so
// the exact rounding) identical from run to run, which the byte-level
// determinism contracts rely on.
PlanPair plans_for(int side) {
  static std::mutex mu;
  static std::unordered_map<int, PlanPair>* cache = new std::unordered_map<int, PlanPair>();
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache->find(side);
  if (it != cache->end()) return it->second;

  std::vector<cplx> a(static_cast<std::size_t>(side) * side), b(a.size());
  auto* in = reinterpret_cast<fftw_complex*>(a.data());
  auto* out = reinterpret_cast<fftw_complex*>(b.data());
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair p;
  p.fwd = fftw_plan_dft_2d(side, side, in, out, FFTW_FORWARD, flags);
  p.bwd = fftw_plan_dft_2d(side, side, in, out, FFTW_BACKWARD, flags);
  if (!p.fwd || !p.bwd) throw std::runtime_error("fftw plan creation failed");
  cache->emplace(side, p);
  return p;
}

// Signed frequency index for unshifted spectra: 0..side/2-1, then negative.
inline int signed_index(int p, int side) { return p < (side + 1) / 2 ? p : p - side; }

}  // namespace

namespace detail {

void require_field(const ComplexField& f, const char* who) {
  if (f.side < 2 || f.data.size() != static_cast<std::size_t>(f.side) * f.side)
    throw std::invalid_argument(std::string(who) + ": field must be square with side >= 2");
}

void require_spectrum(const Spectrum& s, const char* who) {
  if (s.side < 2 || s.data.size() != static_cast<std::size_t>(s.side) * s.side)
    throw std::invalid_argument(std::string(who) + ": spectrum must be square with side >= 2");
}

void require_geometry(const OpticalGeometry& g, int side, bool need_positive_z, const char* who) {
  if (!(g.wavelength > 0.0) || !(g.object_extent > 0.0) || !(g.pixel_pitch > 0.0))
    throw std::invalid_argument(std::string(who) + ": geometry values must be positive");
  if (need_positive_z ? !(g.distance > 0.0) : g.distance < 0.0)
    throw std::invalid_argument(std::string(who) + ": invalid propagation distance");
  if (side > 0 && std::abs(g.pixel_pitch * side - g.object_extent) > 1e-9 * g.object_extent)
    throw std::invalid_argument(std::string(who) + ": pixel_pitch * side != object_extent");
}

void fft_forward(int side, const cplx* in, cplx* out) {
  PlanPair p = plans_for(side);
  fftw_execute_dft(p.fwd, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

void fft_backward_unscaled(int side, const cplx* in, cplx* out) {
  PlanPair p = plans_for(side);
  fftw_execute_dft(p.bwd, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace detail

Spectrum dft2(const ComplexField& field) {
  detail::require_field(field, "dft2");
  Spectrum s;
  s.side = field.side;
  s.data.resize(field.data.size());
  detail::fft_forward(field.side, field.data.data(), s.data.data());
  return s;
}

ComplexField idft2(const Spectrum& spec) {
  detail::require_spectrum(spec, "idft2");
  ComplexField f(spec.side);
  detail::fft_backward_unscaled(spec.side, spec.data.data(), f.data.data());
  const double inv_n = 1.0 / static_cast<double>(f.n());
  for (auto& v : f.data) v *= inv_n;
  return f;
}

cplx dc_component(const Spectrum& spec) {
  detail::require_spectrum(spec, "dc_component");
  return spec.data[0];
}

ComplexField fresnel_propagate(const ComplexField& field, const OpticalGeometry& geom,
                               PropagationDiagnostics* diag) {
  detail::require_field(field, "fresnel_propagate");
  detail::require_geometry(geom, field.side, /*need_positive_z=*/false, "fresnel_propagate");
  if (diag) *diag = {};
  if (geom.distance == 0.0) return field;

  const int side = field.side;
  const double z = geom.distance;
  // Transfer-function sampling guideline: beyond this the quadratic kernel
  // aliases on the grid. Studies sweep across it on purpose, so warn only.
  const double z_limit = geom.pixel_pitch * geom.pixel_pitch * side / geom.wavelength;
  if (diag) {
    diag->sampling_warning = z > z_limit;
    diag->z_limit = z_limit;
  }

  Spectrum s = dft2(field);
  const double df = 1.0 / (side * geom.pixel_pitch);
  const double carrier = 2.0 * kPi / geom.wavelength * z;
  for (int p = 0; p < side; ++p) {
    const double fx = signed_index(p, side) * df;
    for (int q = 0; q < side; ++q) {
      const double fy = signed_index(q, side) * df;
      const double phase = carrier - kPi * geom.wavelength * z * (fx * fx + fy * fy);
      s.at(p, q) *= cplx(std::cos(phase), std::sin(phase));
    }
  }
  return idft2(s);
}

double fresnel_number(const OpticalGeometry& geom) {
  detail::require_geometry(geom, 0, /*need_positive_z=*/true, "fresnel_number");
  return geom.object_extent * geom.object_extent / (geom.wavelength * geom.distance);
}

void save_field(const ComplexField& field, const std::string& path) {
  detail::require_field(field, "save_field");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_field: cannot open " + path);
  std::fprintf(f, "SPCDI-FIELD v1 %d\n", field.side);
  std::size_t wrote = std::fwrite(field.data.data(), sizeof(cplx), field.data.size(), f);
  std::fclose(f);
  if (wrote != field.data.size()) throw std::runtime_error("save_field: short write to " + path);
}

ComplexField load_field(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load_field: cannot open " + path);
  char header[64];
  if (!std::fgets(header, sizeof(header), f)) {
    std::fclose(f);
    throw FormatError("load_field: missing header in " + path, 0);
  }
  int side = 0;
  if (std::sscanf(header, "SPCDI-FIELD v1 %d", &side) != 1 || side < 2) {
    std::fclose(f);
    throw FormatError("load_field: bad header in " + path, 0);
  }
  std::size_t header_len = std::strlen(header);
  ComplexField field(side);
  std::size_t got = std::fread(field.data.data(), sizeof(cplx), field.data.size(), f);
  bool extra = false;
  if (got == field.data.size()) {
    char probe;
    extra = std::fread(&probe, 1, 1, f) == 1;
  }
  std::fclose(f);
  if (got != field.data.size())
    throw FormatError("load_field: truncated payload in " + path,
                      header_len + got * sizeof(cplx));
  if (extra)
    throw FormatError("load_field: trailing bytes in " + path,
                      header_len + field.data.size() * sizeof(cplx));
  for (std::size_t i = 0; i < field.data.size(); ++i) {
    if (!std::isfinite(field.data[i].real()) || !std::isfinite(field.data[i].imag()))
      throw FormatError("load_field: non-finite entry in " + path, header_len + i * sizeof(cplx));
  }
  return field;
}

}  // namespace spcdi

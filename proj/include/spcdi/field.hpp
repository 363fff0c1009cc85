#pragma once

#include <complex>
#include <string>
#include <vector>

namespace spcdi {

using cplx = std::complex<double>;

// Square complex-valued image, row-major. Holds the object O and the
// modulated fields the retrieval loop works on.
struct ComplexField {
  int side = 0;
  std::vector<cplx> data;

  ComplexField() = default;
  explicit ComplexField(int side_, cplx fill = {})
      : side(side_), data(static_cast<std::size_t>(side_) * side_, fill) {}

  long n() const { return static_cast<long>(side) * side; }
  cplx& at(int r, int c) { return data[static_cast<std::size_t>(r) * side + c]; }
  const cplx& at(int r, int c) const { return data[static_cast<std::size_t>(r) * side + c]; }
};

// 2D DFT coefficients of a ComplexField, same square row-major layout.
//
// Convention (pinned project-wide): forward-unnormalized with kernel
// exp(-2*pi*i*(p*u + q*v)/side), so bin (0,0) of the *unshifted* spectrum is
// the plain sum of the spatial entries; idft2 carries the 1/n factor.
// Centered spectra are a display concern only.
struct Spectrum {
  int side = 0;
  std::vector<cplx> data;

  long n() const { return static_cast<long>(side) * side; }
  cplx& at(int r, int c) { return data[static_cast<std::size_t>(r) * side + c]; }
  const cplx& at(int r, int c) const { return data[static_cast<std::size_t>(r) * side + c]; }
};

// Real-valued per-pixel map (amplitude, phase, intensity, depth...).
struct RealMap {
  int side = 0;
  std::vector<double> data;

  RealMap() = default;
  explicit RealMap(int side_, double fill = 0.0)
      : side(side_), data(static_cast<std::size_t>(side_) * side_, fill) {}

  long n() const { return static_cast<long>(side) * side; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * side + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * side + c]; }
};

struct OpticalGeometry {
  double wavelength = 0.0;     // m
  double object_extent = 0.0;  // m, full side length D
  double pixel_pitch = 0.0;    // m, = D / side
  double distance = 0.0;       // m
};

inline OpticalGeometry make_geometry(double wavelength, double object_extent, double distance,
                                     int side) {
  return {wavelength, object_extent, object_extent / side, distance};
}

Spectrum dft2(const ComplexField& field);
ComplexField idft2(const Spectrum& spec);
cplx dc_component(const Spectrum& spec);

struct PropagationDiagnostics {
  bool sampling_warning = false;  // quadratic kernel aliases on this grid
  double z_limit = 0.0;           // side * pitch^2 / lambda guideline
};

// Angular-spectrum propagation with the Fresnel transfer function
// exp(i*(k*z - pi*lambda*z*(fx^2 + fy^2))). Unit modulus, so energy is
// preserved and distances compose additively. z = 0 returns the input.
ComplexField fresnel_propagate(const ComplexField& field, const OpticalGeometry& geom,
                               PropagationDiagnostics* diag = nullptr);

// F = D^2 / (lambda * z); far field means F << 1.
double fresnel_number(const OpticalGeometry& geom);

// File format: "SPCDI-FIELD v1 <side>\n" then side^2 (re, im) pairs of
// little-endian float64, row-major.
void save_field(const ComplexField& field, const std::string& path);
ComplexField load_field(const std::string& path);

namespace detail {
// Raw FFT entry points (also used by forward/retrieval hot paths). backward
// is unnormalized; callers apply 1/n.
void fft_forward(int side, const cplx* in, cplx* out);
void fft_backward_unscaled(int side, const cplx* in, cplx* out);
void require_field(const ComplexField& f, const char* who);
void require_spectrum(const Spectrum& s, const char* who);
void require_geometry(const OpticalGeometry& g, int side, bool need_positive_z, const char* who);
}  // namespace detail

}  // namespace spcdi

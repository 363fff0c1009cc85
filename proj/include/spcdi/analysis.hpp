#pragma once

#include <string>
#include <vector>

#include "spcdi/retrieval.hpp"

namespace spcdi {

// Systematic phase recovered from a flat calibration target; defined up to
// an additive constant (and, see calibrate_background, a canonicalized
// conjugation branch).
struct BackgroundPhase {
  int side = 0;
  std::vector<double> phase;  // radians per pixel
  std::string provenance;     // detector/propagation/seed description
};

struct DepthMap {
  RealMap heights;  // meters
  double wavelength = 0.0;
  double index_contrast = 0.0;
};

double wrap_angle(double x);  // to (-pi, pi]

RealMap amplitude_map(const ComplexField& f);
RealMap phase_map(const ComplexField& f);  // arg per pixel, in (-pi, pi]

// Reconstructs a unit-amplitude zero-phase target through the given
// (detector, propagation) pipeline under an assumed centered DC detector,
// and returns its phase. The conjugation branch (invisible to the
// measurements) is canonicalized against the analytic ramp/chirp the model
// predicts, so the stored sign is deterministic.
BackgroundPhase calibrate_background(const PatternSet& set, const DetectorModel& det,
                                     const PropagationModel& prop, const ReconConfig& cfg);

// Analytic background the (detector, propagation) model predicts:
// +2*pi*(i_g*u + j_g*v)/side minus the Fresnel chirp. Used for branch
// canonicalization and for tests.
RealMap predicted_background(int side, const DetectorModel& det, const PropagationModel& prop);

// Pixelwise wrapped difference recon - background, in (-pi, pi].
RealMap correct_phase(const RealMap& recon_phase, const BackgroundPhase& bg);

// Picks the better of {recon, conj(recon)} after the closed-form optimal
// global phase against truth (theta* = arg <truth, candidate>).
ComplexField align_ambiguities(const ComplexField& recon, const ComplexField& truth);

// 10*log10(peak^2 / MSE), capped at 120 dB (the MSE = 0 sentinel).
double psnr(const RealMap& a, const RealMap& b, double peak);

// Circular RMS distance between two phase maps after removing the best
// constant offset. The headline phase metric (PSNR on wrapped phase is
// ill-posed).
double phase_rms(const RealMap& a, const RealMap& b);

// Row-major Itoh line integration: unwrap the first column, then each row.
// No residue handling; inconsistent input degrades silently.
RealMap unwrap_phase(const RealMap& wrapped);

// h = lambda * phi / (2 * pi * n_delta) per pixel.
DepthMap phase_to_depth(const RealMap& phase, double wavelength, double index_contrast);

// 16-bit P5 graymap, big-endian samples, values mapped linearly onto
// [0, 65535]. A "<path>.scale" sidecar records "offset=<min> scale=<step>"
// with value = offset + pixel * scale.
void save_pgm16(const RealMap& map, const std::string& path);
RealMap load_pgm16(const std::string& path);  // uses the sidecar to restore values

}  // namespace spcdi

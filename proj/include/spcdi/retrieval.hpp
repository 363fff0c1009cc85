#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spcdi/forward.hpp"

namespace spcdi {

enum class PatternOrder { Sequential, ShuffledPerEpoch };

struct ReconConfig {
  // 2.0 is the exact per-constraint projection step for density-0.5 binary
  // patterns under the |P|^2_max normalization; smaller values under-relax
  // and converge measurably slower.
  double alpha = 2.0;             // spatial-update step size, (0, 2]
  int max_epochs = 2500;
  double rel_residual_tol = 1e-6;  // stop when the residual's relative change drops below this
  double residual_floor = 1e-24;   // ...or when the residual itself falls below this
  uint64_t init_seed = 0;
  double init_amp_mean = 1.0;     // amplitude = |N(mean, std)| per pixel
  double init_amp_std = 0.1;
  double init_phase_std = 0.5;    // phase = N(0, std) radians per pixel
  PatternOrder pattern_order = PatternOrder::Sequential;
};

struct ReconDiagnostics {
  int epochs_run = 0;
  std::vector<double> residual_history;  // one entry per epoch
  bool converged = false;
  long degenerate_phase_events = 0;  // |phi| < eps occurrences in the Fourier update
};

// Reconstruction blew up (non-finite residual). Diagnostics up to the
// failure ride along.
class DivergedError : public std::runtime_error {
public:
  DivergedError(const std::string& msg, ReconDiagnostics diag)
      : std::runtime_error(msg), diagnostics(std::move(diag)) {}
  ReconDiagnostics diagnostics;
};

// Gaussian-random starting field, deterministic in init_seed.
ComplexField init_field(int side, const ReconConfig& cfg);

// Fourier-domain update: replace the magnitude of one spectral bin with
// sqrt(I), keep its phase. All other bins are untouched. If the current bin
// value is `eps` or smaller in magnitude the phase factor defaults to 1 and
// *degenerate is set.
Spectrum fourier_update_spectrum(const Spectrum& spec, double intensity, BinOffset bin,
                                 double eps = 0.0, bool* degenerate = nullptr);

// Same update expressed on the spatial field: transform, swap the bin,
// transform back.
ComplexField fourier_update(const ComplexField& psi, double intensity, BinOffset bin,
                            double eps = 0.0, bool* degenerate = nullptr);

// Spatial-domain update
//   O <- O + alpha * P_k / |P_k|^2_max * (psi_new - psi_old)
// (patterns are real, so the conjugate is the pattern itself). Pixels where
// P_k is zero are returned bit-identical.
ComplexField spatial_update(const ComplexField& obj, const PatternSet& set, int k,
                            const ComplexField& psi_old, const ComplexField& psi_new,
                            double alpha);

struct EpochResult {
  double residual = 0.0;  // sum (sqrt(I) - |phi|)^2 / sum I, phi taken pre-update
  long degenerate_events = 0;
};

// One serial sweep over all patterns (and, per pattern, all detector
// channels in ascending index order). `det` is the detector the solver
// assumes; its channel list gives the bins to update. `epoch` keys the
// shuffled order.
EpochResult run_epoch(ComplexField& obj, const PatternSet& set, const MeasurementSet& meas,
                      const DetectorModel& det, const ReconConfig& cfg, int epoch = 0);

struct ReconResult {
  ComplexField field;
  ReconDiagnostics diag;
};

// init_field + epochs until the residual's relative change drops below
// rel_residual_tol, the residual falls under residual_floor, or max_epochs
// is hit. The result is the object up to a global phase and conjugation.
ReconResult reconstruct(const PatternSet& set, const MeasurementSet& meas,
                        const DetectorModel& det, const ReconConfig& cfg);

// Same epoch loop from a caller-supplied starting field (calibration runs
// seed this with the model-predicted background).
ReconResult reconstruct_from(ComplexField initial, const PatternSet& set,
                             const MeasurementSet& meas, const DetectorModel& det,
                             const ReconConfig& cfg);

// Convergence monitor: the residual run_epoch would report from this state.
// Runs the epoch on a scratch copy; obj is not touched.
double residual(const ComplexField& obj, const PatternSet& set, const MeasurementSet& meas,
                const DetectorModel& det, const ReconConfig& cfg = {});

// Diagnostics export, CSV "epoch,residual".
void save_diagnostics(const ReconDiagnostics& diag, const std::string& path);

}  // namespace spcdi

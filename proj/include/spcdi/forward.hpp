#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spcdi/field.hpp"
#include "spcdi/patterns.hpp"

namespace spcdi {

// Frequency-bin offset of a detector channel; (0,0) is the DC bin of the
// unshifted spectrum. Valid range is [-side/2, side/2) per axis.
struct BinOffset {
  int i = 0;
  int j = 0;
  bool operator==(const BinOffset&) const = default;
};

enum class DetectorMode {
  PerChannel,  // one reading per channel (SPAD-array style)
  Summed,      // one reading = sum over all channels (pinhole-free detector)
};

struct DetectorModel {
  std::vector<BinOffset> channels{{0, 0}};
  DetectorMode mode = DetectorMode::PerChannel;
  double noise_sigma = 0.0;  // absolute std of additive Gaussian noise on intensities
  uint64_t noise_seed = 0;
};

enum class PropagationKind { Fraunhofer, Fresnel };

struct PropagationModel {
  PropagationKind kind = PropagationKind::Fraunhofer;
  OpticalGeometry geometry;  // used by Fresnel only
};

struct Provenance {
  uint64_t object_hash = 0;
  uint64_t pattern_seed = 0;
  std::string detector;
  std::string propagation;
};

// Per-pattern, per-channel non-negative intensity readings, row-major
// (pattern-major). channel_labels carries the CSV (i, j) columns; summed
// mode has one column labeled with the first channel.
struct MeasurementSet {
  int count = 0;     // m
  int channels = 0;  // c
  std::vector<double> data;
  std::vector<BinOffset> channel_labels;
  Provenance prov;

  double& at(int k, int c) { return data[static_cast<std::size_t>(k) * channels + c]; }
  double at(int k, int c) const { return data[static_cast<std::size_t>(k) * channels + c]; }
};

// |sum P_k . O|^2, the DC-bin intensity of the modulated field's spectrum.
double measure_dc(const ComplexField& obj, const PatternSet& set, int k);

// Per-channel intensities (or their sum) of pattern k under the given
// detector and propagation. Fresnel propagation is the finite-distance
// single-transform form: bin sampling of F[chirp . P_k . O], which reduces
// to the Fraunhofer case as the Fresnel number goes to 0.
std::vector<double> measure_channels(const ComplexField& obj, const PatternSet& set, int k,
                                     const DetectorModel& det, const PropagationModel& prop);

// All m patterns; OpenMP across k. Noise (if noise_sigma > 0) is additive
// Gaussian keyed by (noise_seed, k, channel), negatives clamped to 0, so
// parallel and serial synthesis agree bitwise.
MeasurementSet synthesize(const ComplexField& obj, const PatternSet& set,
                          const DetectorModel& det, const PropagationModel& prop);

// In-place noise application with the same keying (used by synthesize and by
// the harness when sigma is derived from the noiseless mean).
void apply_noise(MeasurementSet& ms, double sigma, uint64_t seed);

// Conventional-CDI array measurement |F[O]|^2 (Fraunhofer), for the
// dynamic-range comparison only.
RealMap measure_cdi_reference(const ComplexField& obj);

struct DynamicRange {
  double value = 0.0;  // max / min over strictly positive entries
  long excluded = 0;   // zero (or negative) entries left out
};

DynamicRange dynamic_range(const std::vector<double>& values);

// CSV "k,channel_i,channel_j,intensity"; floats printed shortest-round-trip
// so load(save(x)) is bit-exact. A one-line provenance sidecar goes to
// "<path>.prov".
void save_measurements(const MeasurementSet& ms, const std::string& path);
MeasurementSet load_measurements(const std::string& path);

uint64_t field_hash(const ComplexField& field);  // FNV-1a over raw bytes

namespace detail {
MeasurementSet synthesize_serial(const ComplexField& obj, const PatternSet& set,
                                 const DetectorModel& det, const PropagationModel& prop);
long bin_index(int side, BinOffset off);  // validates range, wraps negatives
// Single-transform Fresnel chirp exp(i*pi*((u-c)^2+(v-c)^2)*pitch^2/(lambda z)),
// c = (side-1)/2.
std::vector<cplx> fresnel_chirp(int side, const OpticalGeometry& geom);
}  // namespace detail

}  // namespace spcdi

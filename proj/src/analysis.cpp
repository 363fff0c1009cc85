#include "spcdi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "spcdi/errors.hpp"
#include "spcdi/philox.hpp"

namespace spcdi {

namespace {

constexpr double kPi = 3.141592653589793238462643;

void require_same_side(int a, int b, const char* who) {
  if (a != b) throw std::invalid_argument(std::string(who) + ": side mismatch");
}

// Remove the best global phase against `reference`, returning the rotated
// candidate and its squared error.
std::pair<ComplexField, double> phase_aligned(const ComplexField& cand,
                                              const ComplexField& reference) {
  cplx s{};
  for (long p = 0; p < cand.n(); ++p) s += reference.data[p] * std::conj(cand.data[p]);
  const cplx rot = s == cplx{} ? cplx(1.0, 0.0) : std::polar(1.0, std::arg(s));
  ComplexField out = cand;
  double err = 0.0;
  for (long p = 0; p < out.n(); ++p) {
    out.data[p] *= rot;
    err += std::norm(reference.data[p] - out.data[p]);
  }
  return {std::move(out), err};
}

ComplexField conjugated(const ComplexField& f) {
  ComplexField out = f;
  for (auto& v : out.data) v = std::conj(v);
  return out;
}

}  // namespace

double wrap_angle(double x) {
  double w = std::remainder(x, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

RealMap amplitude_map(const ComplexField& f) {
  RealMap m(f.side);
  for (long p = 0; p < f.n(); ++p) m.data[p] = std::abs(f.data[p]);
  return m;
}

RealMap phase_map(const ComplexField& f) {
  RealMap m(f.side);
  for (long p = 0; p < f.n(); ++p) m.data[p] = wrap_angle(std::arg(f.data[p]));
  return m;
}

RealMap predicted_background(int side, const DetectorModel& det, const PropagationModel& prop) {
  RealMap model(side, 0.0);
  BinOffset off = det.channels.size() == 1 ? det.channels.front() : BinOffset{0, 0};
  std::vector<cplx> chirp;
  if (prop.kind == PropagationKind::Fresnel) chirp = detail::fresnel_chirp(side, prop.geometry);
  for (int u = 0; u < side; ++u)
    for (int v = 0; v < side; ++v) {
      double ph = 2.0 * kPi * (static_cast<double>(off.i) * u + static_cast<double>(off.j) * v) /
                  side;
      if (!chirp.empty()) ph -= std::arg(chirp[static_cast<std::size_t>(u) * side + v]);
      model.at(u, v) = wrap_angle(ph);
    }
  return model;
}

BackgroundPhase calibrate_background(const PatternSet& set, const DetectorModel& det,
                                     const PropagationModel& prop, const ReconConfig& cfg) {
  if (det.mode == DetectorMode::PerChannel && det.channels.size() > 1)
    throw std::invalid_argument(
        "calibrate_background: only single-bin or summed detectors develop a background");

  const ComplexField flat(set.side, cplx(1.0, 0.0));
  MeasurementSet ms = synthesize(flat, set, det, prop);
  const DetectorModel assumed{{{0, 0}}, DetectorMode::PerChannel, 0.0, 0};

  // Start from the analytic ramp/chirp the setup predicts, jittered by the
  // configured Gaussian spread. The reconstruction then captures whatever
  // the model misses. (A cold random start cannot cross the near-flat
  // degeneracy of this problem in any reasonable epoch count.)
  const RealMap model = predicted_background(set.side, det, prop);
  ComplexField start(set.side);
  for (long p = 0; p < start.n(); ++p) {
    double amp = std::abs(cfg.init_amp_mean +
                          cfg.init_amp_std * rng::gaussian(cfg.init_seed,
                                                           rng::Stream::init_amplitude, 1, p));
    double ph = model.data[p] +
                cfg.init_phase_std * rng::gaussian(cfg.init_seed, rng::Stream::init_phase, 1, p);
    start.data[p] = std::polar(amp, ph);
  }
  ReconResult rec = reconstruct_from(std::move(start), set, ms, assumed, cfg);

  // Align both conjugation branches to the flat reference (global phase
  // only; the branches are equidistant from a flat field), then pick the one
  // matching the analytic model of this detector/propagation setup.
  auto [cand_a, err_a] = phase_aligned(rec.field, flat);
  auto [cand_b, err_b] = phase_aligned(conjugated(rec.field), flat);
  (void)err_a;
  (void)err_b;
  const RealMap pa = phase_map(cand_a);
  const RealMap pb = phase_map(cand_b);
  const double da = phase_rms(pa, model);
  const double db = phase_rms(pb, model);

  BackgroundPhase bg;
  bg.side = set.side;
  bg.phase = (db < da ? pb : pa).data;
  bg.provenance = ms.prov.detector + " " + ms.prov.propagation +
                  " init_seed=" + std::to_string(cfg.init_seed);
  return bg;
}

RealMap correct_phase(const RealMap& recon_phase, const BackgroundPhase& bg) {
  require_same_side(recon_phase.side, bg.side, "correct_phase");
  RealMap out(recon_phase.side);
  for (long p = 0; p < out.n(); ++p) out.data[p] = wrap_angle(recon_phase.data[p] - bg.phase[p]);
  return out;
}

ComplexField align_ambiguities(const ComplexField& recon, const ComplexField& truth) {
  detail::require_field(recon, "align_ambiguities");
  detail::require_field(truth, "align_ambiguities");
  require_same_side(recon.side, truth.side, "align_ambiguities");
  double truth_energy = 0.0;
  for (const auto& v : truth.data) truth_energy += std::norm(v);
  if (truth_energy == 0.0)
    throw std::invalid_argument("align_ambiguities: truth is identically zero");

  auto [cand_a, err_a] = phase_aligned(recon, truth);
  auto [cand_b, err_b] = phase_aligned(conjugated(recon), truth);
  return err_b < err_a ? std::move(cand_b) : std::move(cand_a);
}

double psnr(const RealMap& a, const RealMap& b, double peak) {
  require_same_side(a.side, b.side, "psnr");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  double mse = 0.0;
  for (long p = 0; p < a.n(); ++p) {
    double d = a.data[p] - b.data[p];
    mse += d * d;
  }
  mse /= static_cast<double>(a.n());
  if (mse == 0.0) return 120.0;
  return std::min(10.0 * std::log10(peak * peak / mse), 120.0);
}

double phase_rms(const RealMap& a, const RealMap& b) {
  require_same_side(a.side, b.side, "phase_rms");
  double sx = 0.0, sy = 0.0;
  for (long p = 0; p < a.n(); ++p) {
    double d = a.data[p] - b.data[p];
    sx += std::cos(d);
    sy += std::sin(d);
  }
  const double mean = std::atan2(sy, sx);  // circular mean of the offset
  double acc = 0.0;
  for (long p = 0; p < a.n(); ++p) {
    double d = wrap_angle(a.data[p] - b.data[p] - mean);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.n()));
}

RealMap unwrap_phase(const RealMap& wrapped) {
  RealMap out(wrapped.side);
  const int side = wrapped.side;
  out.at(0, 0) = wrapped.at(0, 0);
  for (int r = 1; r < side; ++r)
    out.at(r, 0) = out.at(r - 1, 0) + wrap_angle(wrapped.at(r, 0) - wrapped.at(r - 1, 0));
  for (int r = 0; r < side; ++r)
    for (int c = 1; c < side; ++c)
      out.at(r, c) = out.at(r, c - 1) + wrap_angle(wrapped.at(r, c) - wrapped.at(r, c - 1));
  return out;
}

DepthMap phase_to_depth(const RealMap& phase, double wavelength, double index_contrast) {
  if (!(index_contrast > 0.0))
    throw std::invalid_argument("phase_to_depth: index contrast must be > 0");
  if (!(wavelength > 0.0)) throw std::invalid_argument("phase_to_depth: wavelength must be > 0");
  DepthMap dm;
  dm.wavelength = wavelength;
  dm.index_contrast = index_contrast;
  dm.heights = RealMap(phase.side);
  const double scale = wavelength / (2.0 * kPi * index_contrast);
  for (long p = 0; p < phase.n(); ++p) dm.heights.data[p] = scale * phase.data[p];
  return dm;
}

void save_pgm16(const RealMap& map, const std::string& path) {
  if (map.side < 1 || map.data.size() != static_cast<std::size_t>(map.side) * map.side)
    throw std::invalid_argument("save_pgm16: malformed map");
  double mn = map.data[0], mx = map.data[0];
  for (double v : map.data) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double step = mx > mn ? (mx - mn) / 65535.0 : 0.0;

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_pgm16: cannot open " + path);
  std::fprintf(f, "P5\n%d %d\n65535\n", map.side, map.side);
  for (double v : map.data) {
    unsigned val = step > 0.0 ? static_cast<unsigned>(std::lround((v - mn) / step)) : 0u;
    val = std::min(val, 65535u);
    unsigned char be[2] = {static_cast<unsigned char>(val >> 8),
                           static_cast<unsigned char>(val & 0xFF)};
    std::fwrite(be, 1, 2, f);
  }
  std::fclose(f);

  std::FILE* s = std::fopen((path + ".scale").c_str(), "wb");
  if (!s) throw std::runtime_error("save_pgm16: cannot open " + path + ".scale");
  std::fprintf(s, "offset=%.17g scale=%.17g\n", mn, step);
  std::fclose(s);
}

RealMap load_pgm16(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load_pgm16: cannot open " + path);
  int w = 0, h = 0, maxval = 0;
  if (std::fscanf(f, "P5 %d %d %d", &w, &h, &maxval) != 3 || w != h || maxval != 65535) {
    std::fclose(f);
    throw FormatError("load_pgm16: bad header in " + path, 0);
  }
  std::fgetc(f);  // single whitespace after maxval
  RealMap map(w);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 2);
  std::size_t got = std::fread(raw.data(), 1, raw.size(), f);
  std::fclose(f);
  if (got != raw.size()) throw FormatError("load_pgm16: truncated payload in " + path, got);

  double offset = 0.0, scale = 0.0;
  std::FILE* s = std::fopen((path + ".scale").c_str(), "rb");
  if (!s) throw std::runtime_error("load_pgm16: missing sidecar for " + path);
  int fields = std::fscanf(s, "offset=%lf scale=%lf", &offset, &scale);
  std::fclose(s);
  if (fields != 2) throw FormatError("load_pgm16: bad sidecar for " + path, 0);

  for (long p = 0; p < map.n(); ++p) {
    unsigned val = (static_cast<unsigned>(raw[2 * p]) << 8) | raw[2 * p + 1];
    map.data[p] = offset + val * scale;
  }
  return map;
}

}  // namespace spcdi

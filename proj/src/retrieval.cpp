#include "spcdi/retrieval.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "spcdi/philox.hpp"

namespace spcdi {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

void require_recon_inputs(const PatternSet& set, const MeasurementSet& meas,
                          const DetectorModel& det, const char* who) {
  if (set.count < 1 || meas.count < 1)
    throw std::invalid_argument(std::string(who) + ": empty measurement set");
  if (meas.count != set.count)
    throw std::invalid_argument(std::string(who) + ": pattern/measurement count mismatch");
  if (det.channels.empty())
    throw std::invalid_argument(std::string(who) + ": detector needs at least one channel");
  if (meas.channels != static_cast<int>(det.channels.size()))
    throw std::invalid_argument(std::string(who) + ": measurement columns != detector channels");
  for (int k = 0; k < meas.count; ++k)
    for (int c = 0; c < meas.channels; ++c)
      if (!(meas.at(k, c) >= 0.0))
        throw std::invalid_argument(std::string(who) + ": negative or non-finite intensity");
}

void require_cfg(const ReconConfig& cfg, const char* who) {
  if (!(cfg.alpha > 0.0) || cfg.alpha > 2.0)
    throw std::invalid_argument(std::string(who) + ": alpha must be in (0, 2]");
  if (cfg.max_epochs < 1) throw std::invalid_argument(std::string(who) + ": max_epochs >= 1");
  if (!(cfg.rel_residual_tol > 0.0))
    throw std::invalid_argument(std::string(who) + ": rel_residual_tol must be > 0");
  if (!(cfg.residual_floor >= 0.0))
    throw std::invalid_argument(std::string(who) + ": residual_floor must be >= 0");
  if (!(cfg.init_amp_std >= 0.0) || !(cfg.init_phase_std >= 0.0))
    throw std::invalid_argument(std::string(who) + ": init stds must be >= 0");
}

// Scale-aware guard for the undefined phase of a zero bin (Eq. 3 leaves
// phi/|phi| open there).
double degenerate_eps(const MeasurementSet& meas) {
  double total = 0.0;
  for (double v : meas.data) total += v;
  return 1e-12 * std::sqrt(total / meas.count);
}

std::vector<int> epoch_order(const ReconConfig& cfg, int m, int epoch) {
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.pattern_order == PatternOrder::ShuffledPerEpoch) {
    // Fisher-Yates keyed by (init_seed, epoch, position): identical order on
    // every rerun with the same config.
    for (int i = m - 1; i > 0; --i) {
      uint64_t r = rng::bits64(cfg.init_seed, rng::Stream::shuffle, epoch, i);
      std::swap(order[i], order[r % static_cast<uint64_t>(i + 1)]);
    }
  }
  return order;
}

// Precomputed per-channel plane waves for one reconstruction. The Fourier
// update touches exactly one bin, so in the spatial domain it is the plane
// wave idft2(delta_bin) scaled by the bin correction; the bin value itself
// is a single spectral coefficient, i.e. one dot product with the conjugate
// wave. Neither side needs a full transform.
struct EpochWorkspace {
  std::vector<std::vector<cplx>> ramp_up;    // exp(+2*pi*i*(gi*u+gj*v)/S) / n
  std::vector<std::vector<cplx>> ramp_down;  // exp(-2*pi*i*(gi*u+gj*v)/S)
  std::vector<bool> is_dc;
  // Binary patterns: flattened set-bit index lists (skips the ~50% zero
  // pixels and the bit extraction in the inner loops). Built only while the
  // memory cost stays modest.
  std::vector<int32_t> bit_index;
  std::vector<std::size_t> bit_offset;  // count+1 entries when built
  double sum_intensity = 0.0;
  double eps = 0.0;

  EpochWorkspace(const PatternSet& set, const MeasurementSet& meas, const DetectorModel& det) {
    const int side = set.side;
    const long n = set.pixels();
    const std::size_t channels = det.channels.size();
    ramp_up.resize(channels);
    ramp_down.resize(channels);
    is_dc.resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      (void)detail::bin_index(side, det.channels[c]);  // range check
      is_dc[c] = det.channels[c].i == 0 && det.channels[c].j == 0;
      if (is_dc[c]) continue;
      ramp_up[c].resize(n);
      ramp_down[c].resize(n);
      const double gi = det.channels[c].i, gj = det.channels[c].j;
      const double inv_n = 1.0 / static_cast<double>(n);
      for (int u = 0; u < side; ++u)
        for (int v = 0; v < side; ++v) {
          double phase = kTwoPi * (gi * u + gj * v) / side;
          cplx w(std::cos(phase), std::sin(phase));
          ramp_up[c][static_cast<std::size_t>(u) * side + v] = inv_n * w;
          ramp_down[c][static_cast<std::size_t>(u) * side + v] = std::conj(w);
        }
    }
    for (double v : meas.data) sum_intensity += v;
    eps = 1e-12 * std::sqrt(sum_intensity / meas.count);

    if (set.kind == PatternKind::Binary &&
        static_cast<std::size_t>(set.count) * n * sizeof(int32_t) / 2 < (256u << 20)) {
      bit_offset.reserve(set.count + 1);
      bit_offset.push_back(0);
      bit_index.reserve(static_cast<std::size_t>(set.count) * n / 2 + n);
      const int rb = set.row_bytes();
      for (int k = 0; k < set.count; ++k) {
        const uint8_t* bits =
            set.packed.data() + static_cast<std::size_t>(k) * set.pattern_stride_bytes();
        long p = 0;
        for (int r = 0; r < side; ++r) {
          const uint8_t* row = bits + static_cast<long>(r) * rb;
          for (int col = 0; col < side; ++col, ++p)
            if ((row[col >> 3] >> (col & 7)) & 1u) bit_index.push_back(static_cast<int32_t>(p));
        }
        bit_offset.push_back(bit_index.size());
      }
    }
  }
};

// One serial sweep of Eqs. 3-4 over all (pattern, channel) pairs. Residual
// terms use the bin value phi as found just before each update.
double epoch_pass(ComplexField& obj, const PatternSet& set, const MeasurementSet& meas,
                  const ReconConfig& cfg, int epoch, EpochWorkspace& ws, long& degenerate) {
  const long n = set.pixels();
  const int side = set.side;
  const int channels = meas.channels;
  const double inv_n = 1.0 / static_cast<double>(n);
  double rnum = 0.0;
  const std::vector<int> order = epoch_order(cfg, set.count, epoch);

  const bool indexed = !ws.bit_offset.empty();
  for (int k : order) {
    const double inv_maxsq = 1.0 / set.max_abs_sq(k);
    const uint8_t* bits = set.kind == PatternKind::Binary
                              ? set.packed.data() +
                                    static_cast<std::size_t>(k) * set.pattern_stride_bytes()
                              : nullptr;
    const double* grays = set.kind == PatternKind::Gray
                              ? set.values.data() + static_cast<std::size_t>(k) * n
                              : nullptr;
    const int rb = set.row_bytes();
    const int32_t* idx = indexed ? ws.bit_index.data() + ws.bit_offset[k] : nullptr;
    const std::size_t idx_count = indexed ? ws.bit_offset[k + 1] - ws.bit_offset[k] : 0;

    for (int c = 0; c < channels; ++c) {
      // phi = bin value of F[P_k . O] under the forward-unnormalized DFT
      cplx phi{};
      if (bits) {
        double re = 0.0, im = 0.0;
        if (indexed) {
          if (ws.is_dc[c]) {
            for (std::size_t t = 0; t < idx_count; ++t) {
              re += obj.data[idx[t]].real();
              im += obj.data[idx[t]].imag();
            }
          } else {
            const cplx* down = ws.ramp_down[c].data();
            for (std::size_t t = 0; t < idx_count; ++t) {
              const cplx v = obj.data[idx[t]] * down[idx[t]];
              re += v.real();
              im += v.imag();
            }
          }
        } else {
          const cplx* down = ws.is_dc[c] ? nullptr : ws.ramp_down[c].data();
          long p = 0;
          for (int r = 0; r < side; ++r) {
            const uint8_t* row = bits + static_cast<long>(r) * rb;
            for (int col = 0; col < side; ++col, ++p) {
              const double w = (row[col >> 3] >> (col & 7)) & 1u;
              const cplx v = down ? obj.data[p] * down[p] : obj.data[p];
              re += w * v.real();
              im += w * v.imag();
            }
          }
        }
        phi = {re, im};
      } else {
        if (ws.is_dc[c]) {
          for (long p = 0; p < n; ++p) phi += grays[p] * obj.data[p];
        } else {
          const cplx* down = ws.ramp_down[c].data();
          for (long p = 0; p < n; ++p) phi += grays[p] * obj.data[p] * down[p];
        }
      }

      const double mag = std::abs(phi);
      const double target = std::sqrt(meas.at(k, c));
      rnum += (target - mag) * (target - mag);

      cplx factor;
      if (mag <= ws.eps) {
        factor = cplx(1.0, 0.0);
        ++degenerate;
      } else {
        factor = phi / mag;
      }
      const cplx delta = target * factor - phi;

      // O += alpha * P/|P|^2_max * (psi_new - psi_old),
      // psi_new - psi_old = delta * exp(+2*pi*i*(gi*u+gj*v)/S) / n
      if (bits) {
        if (indexed) {
          if (ws.is_dc[c]) {
            const cplx step = cfg.alpha * delta * inv_n;
            for (std::size_t t = 0; t < idx_count; ++t) obj.data[idx[t]] += step;
          } else {
            const cplx* up = ws.ramp_up[c].data();
            const cplx scaled = cfg.alpha * delta;
            for (std::size_t t = 0; t < idx_count; ++t)
              obj.data[idx[t]] += scaled * up[idx[t]];
          }
        } else {
          const cplx* up = ws.is_dc[c] ? nullptr : ws.ramp_up[c].data();
          const cplx step = cfg.alpha * delta * inv_n;
          const cplx scaled = cfg.alpha * delta;
          long p = 0;
          for (int r = 0; r < side; ++r) {
            const uint8_t* row = bits + static_cast<long>(r) * rb;
            for (int col = 0; col < side; ++col, ++p) {
              const double w = (row[col >> 3] >> (col & 7)) & 1u;
              obj.data[p] += w * (up ? scaled * up[p] : step);
            }
          }
        }
      } else {
        if (ws.is_dc[c]) {
          const cplx step = cfg.alpha * delta * inv_n * inv_maxsq;
          for (long p = 0; p < n; ++p) obj.data[p] += grays[p] * step;
        } else {
          const cplx* up = ws.ramp_up[c].data();
          const cplx scaled = cfg.alpha * delta * inv_maxsq;
          for (long p = 0; p < n; ++p) obj.data[p] += grays[p] * (scaled * up[p]);
        }
      }
    }
  }
  return rnum / (ws.sum_intensity > 0.0 ? ws.sum_intensity : 1.0);
}

}  // namespace

ComplexField init_field(int side, const ReconConfig& cfg) {
  if (side < 2) throw std::invalid_argument("init_field: side must be >= 2");
  ComplexField f(side);
  for (long p = 0; p < f.n(); ++p) {
    double amp = std::abs(cfg.init_amp_mean +
                          cfg.init_amp_std * rng::gaussian(cfg.init_seed,
                                                           rng::Stream::init_amplitude, 0, p));
    double phase =
        cfg.init_phase_std * rng::gaussian(cfg.init_seed, rng::Stream::init_phase, 0, p);
    f.data[p] = std::polar(amp, phase);
  }
  return f;
}

Spectrum fourier_update_spectrum(const Spectrum& spec, double intensity, BinOffset bin,
                                 double eps, bool* degenerate) {
  detail::require_spectrum(spec, "fourier_update");
  if (!(intensity >= 0.0))
    throw std::invalid_argument("fourier_update: intensity must be >= 0");
  Spectrum out = spec;
  const long b = detail::bin_index(spec.side, bin);
  const cplx phi = out.data[b];
  const double mag = std::abs(phi);
  bool degen = mag <= eps;
  if (degenerate) *degenerate = degen;
  out.data[b] = std::sqrt(intensity) * (degen ? cplx(1.0, 0.0) : phi / mag);
  return out;
}

ComplexField fourier_update(const ComplexField& psi, double intensity, BinOffset bin, double eps,
                            bool* degenerate) {
  return idft2(fourier_update_spectrum(dft2(psi), intensity, bin, eps, degenerate));
}

ComplexField spatial_update(const ComplexField& obj, const PatternSet& set, int k,
                            const ComplexField& psi_old, const ComplexField& psi_new,
                            double alpha) {
  detail::require_field(obj, "spatial_update");
  if (obj.side != set.side || psi_old.side != obj.side || psi_new.side != obj.side)
    throw std::invalid_argument("spatial_update: side mismatch");
  const double maxsq = set.max_abs_sq(k);
  if (!(maxsq > 0.0)) throw std::invalid_argument("spatial_update: all-zero pattern");
  ComplexField out = obj;
  const double scale = alpha / maxsq;
  for (long p = 0; p < obj.n(); ++p) {
    const double pv = set.value(k, p);
    if (pv != 0.0) out.data[p] += scale * pv * (psi_new.data[p] - psi_old.data[p]);
  }
  return out;
}

EpochResult run_epoch(ComplexField& obj, const PatternSet& set, const MeasurementSet& meas,
                      const DetectorModel& det, const ReconConfig& cfg, int epoch) {
  detail::require_field(obj, "run_epoch");
  if (obj.side != set.side) throw std::invalid_argument("run_epoch: object/pattern side mismatch");
  require_recon_inputs(set, meas, det, "run_epoch");
  require_cfg(cfg, "run_epoch");
  EpochWorkspace ws(set, meas, det);
  EpochResult res;
  res.residual = epoch_pass(obj, set, meas, cfg, epoch, ws, res.degenerate_events);
  return res;
}

ReconResult reconstruct_from(ComplexField initial, const PatternSet& set,
                             const MeasurementSet& meas, const DetectorModel& det,
                             const ReconConfig& cfg) {
  detail::require_field(initial, "reconstruct_from");
  if (initial.side != set.side)
    throw std::invalid_argument("reconstruct_from: initial field side mismatch");
  require_recon_inputs(set, meas, det, "reconstruct");
  require_cfg(cfg, "reconstruct");

  ReconResult result;
  result.field = std::move(initial);
  EpochWorkspace ws(set, meas, det);
  ReconDiagnostics& diag = result.diag;

  double prev = 0.0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double res = epoch_pass(result.field, set, meas, cfg, epoch, ws,
                            diag.degenerate_phase_events);
    diag.residual_history.push_back(res);
    diag.epochs_run = epoch + 1;
    if (!std::isfinite(res))
      throw DivergedError("reconstruct: non-finite residual at epoch " + std::to_string(epoch + 1),
                          diag);
    if (res <= cfg.residual_floor) {
      diag.converged = true;
      break;
    }
    if (epoch > 0) {
      double change = std::abs(res - prev) / std::max(prev, 1e-30);
      if (change < cfg.rel_residual_tol) {
        diag.converged = true;
        break;
      }
    }
    prev = res;
  }
  return result;
}

ReconResult reconstruct(const PatternSet& set, const MeasurementSet& meas,
                        const DetectorModel& det, const ReconConfig& cfg) {
  if (set.side < 2) throw std::invalid_argument("reconstruct: side must be >= 2");
  require_cfg(cfg, "reconstruct");
  return reconstruct_from(init_field(set.side, cfg), set, meas, det, cfg);
}

double residual(const ComplexField& obj, const PatternSet& set, const MeasurementSet& meas,
                const DetectorModel& det, const ReconConfig& cfg) {
  ComplexField scratch = obj;
  return run_epoch(scratch, set, meas, det, cfg, 0).residual;
}

void save_diagnostics(const ReconDiagnostics& diag, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_diagnostics: cannot open " + path);
  std::fputs("epoch,residual\n", f);
  for (std::size_t e = 0; e < diag.residual_history.size(); ++e)
    std::fprintf(f, "%zu,%.17g\n", e + 1, diag.residual_history[e]);
  std::fclose(f);
}

}  // namespace spcdi

#include "spcdi/forward.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "spcdi/errors.hpp"
#include "spcdi/philox.hpp"

namespace spcdi {

namespace {

constexpr double kPi = 3.141592653589793238462643;

void require_det(const DetectorModel& det, int side, const char* who) {
  if (det.channels.empty())
    throw std::invalid_argument(std::string(who) + ": detector needs at least one channel");
  for (const auto& off : det.channels) (void)detail::bin_index(side, off);
  if (det.noise_sigma < 0.0)
    throw std::invalid_argument(std::string(who) + ": noise_sigma must be >= 0");
}

std::string detector_string(const DetectorModel& det) {
  std::string s = det.mode == DetectorMode::Summed ? "summed[" : "per_channel[";
  for (std::size_t c = 0; c < det.channels.size(); ++c) {
    if (c) s += ';';
    s += std::to_string(det.channels[c].i) + "," + std::to_string(det.channels[c].j);
  }
  s += "]";
  return s;
}

std::string propagation_string(const PropagationModel& prop) {
  if (prop.kind == PropagationKind::Fraunhofer) return "fraunhofer";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "fresnel[lambda=%g,D=%g,z=%g]", prop.geometry.wavelength,
                prop.geometry.object_extent, prop.geometry.distance);
  return buf;
}

// Shared per-pattern kernel: modulate, optional chirp, transform, sample
// bins. Both synthesize paths call exactly this, so threading cannot change
// the arithmetic.
void measure_row(const ComplexField& obj, const PatternSet& set, int k,
                 const DetectorModel& det, const std::vector<cplx>& chirp,
                 const std::vector<long>& bins, ComplexField& psi, std::vector<cplx>& spec,
                 double* out) {
  set.modulate(k, obj, psi);
  if (!chirp.empty())
    for (std::size_t p = 0; p < psi.data.size(); ++p) psi.data[p] *= chirp[p];
  spec.resize(psi.data.size());
  detail::fft_forward(psi.side, psi.data.data(), spec.data());
  if (det.mode == DetectorMode::Summed) {
    double acc = 0.0;
    for (long b : bins) acc += std::norm(spec[b]);  // ascending channel order
    out[0] = acc;
  } else {
    for (std::size_t c = 0; c < bins.size(); ++c) out[c] = std::norm(spec[bins[c]]);
  }
}

MeasurementSet synthesize_impl(const ComplexField& obj, const PatternSet& set,
                               const DetectorModel& det, const PropagationModel& prop,
                               bool parallel) {
  detail::require_field(obj, "synthesize");
  if (obj.side != set.side) throw std::invalid_argument("synthesize: object/pattern side mismatch");
  require_det(det, obj.side, "synthesize");

  std::vector<cplx> chirp;
  if (prop.kind == PropagationKind::Fresnel)
    chirp = detail::fresnel_chirp(obj.side, prop.geometry);

  std::vector<long> bins(det.channels.size());
  for (std::size_t c = 0; c < bins.size(); ++c) bins[c] = detail::bin_index(obj.side, det.channels[c]);

  MeasurementSet ms;
  ms.count = set.count;
  ms.channels = det.mode == DetectorMode::Summed ? 1 : static_cast<int>(det.channels.size());
  ms.data.assign(static_cast<std::size_t>(ms.count) * ms.channels, 0.0);
  ms.channel_labels = det.mode == DetectorMode::Summed
                          ? std::vector<BinOffset>{det.channels.front()}
                          : det.channels;
  ms.prov = {field_hash(obj), set.seed, detector_string(det), propagation_string(prop)};

  if (parallel) {
#pragma omp parallel
    {
      ComplexField psi;
      std::vector<cplx> spec;
#pragma omp for schedule(static)
      for (int k = 0; k < set.count; ++k)
        measure_row(obj, set, k, det, chirp, bins, psi, spec, &ms.at(k, 0));
    }
  } else {
    ComplexField psi;
    std::vector<cplx> spec;
    for (int k = 0; k < set.count; ++k)
      measure_row(obj, set, k, det, chirp, bins, psi, spec, &ms.at(k, 0));
  }

  if (det.noise_sigma > 0.0) apply_noise(ms, det.noise_sigma, det.noise_seed);
  return ms;
}

}  // namespace

namespace detail {

long bin_index(int side, BinOffset off) {
  const int lo = -(side / 2);
  const int hi = (side + 1) / 2;  // exclusive
  if (off.i < lo || off.i >= hi || off.j < lo || off.j >= hi)
    throw std::invalid_argument("detector channel offset (" + std::to_string(off.i) + "," +
                                std::to_string(off.j) + ") outside [-side/2, side/2)");
  const int r = (off.i % side + side) % side;
  const int c = (off.j % side + side) % side;
  return static_cast<long>(r) * side + c;
}

std::vector<cplx> fresnel_chirp(int side, const OpticalGeometry& geom) {
  require_geometry(geom, side, /*need_positive_z=*/true, "fresnel measurement");
  std::vector<cplx> chirp(static_cast<std::size_t>(side) * side);
  const double center = (side - 1) / 2.0;
  const double scale = kPi * geom.pixel_pitch * geom.pixel_pitch /
                       (geom.wavelength * geom.distance);
  for (int u = 0; u < side; ++u) {
    const double du = u - center;
    for (int v = 0; v < side; ++v) {
      const double dv = v - center;
      const double phase = scale * (du * du + dv * dv);
      chirp[static_cast<std::size_t>(u) * side + v] = cplx(std::cos(phase), std::sin(phase));
    }
  }
  return chirp;
}

MeasurementSet synthesize_serial(const ComplexField& obj, const PatternSet& set,
                                 const DetectorModel& det, const PropagationModel& prop) {
  return synthesize_impl(obj, set, det, prop, false);
}

}  // namespace detail

double measure_dc(const ComplexField& obj, const PatternSet& set, int k) {
  detail::require_field(obj, "measure_dc");
  if (obj.side != set.side) throw std::invalid_argument("measure_dc: object/pattern side mismatch");
  ComplexField psi;
  set.modulate(k, obj, psi);
  return std::norm(dc_component(dft2(psi)));
}

std::vector<double> measure_channels(const ComplexField& obj, const PatternSet& set, int k,
                                     const DetectorModel& det, const PropagationModel& prop) {
  detail::require_field(obj, "measure_channels");
  if (obj.side != set.side)
    throw std::invalid_argument("measure_channels: object/pattern side mismatch");
  require_det(det, obj.side, "measure_channels");

  std::vector<cplx> chirp;
  if (prop.kind == PropagationKind::Fresnel)
    chirp = detail::fresnel_chirp(obj.side, prop.geometry);
  std::vector<long> bins(det.channels.size());
  for (std::size_t c = 0; c < bins.size(); ++c) bins[c] = detail::bin_index(obj.side, det.channels[c]);

  std::vector<double> out(det.mode == DetectorMode::Summed ? 1 : det.channels.size());
  ComplexField psi;
  std::vector<cplx> spec;
  measure_row(obj, set, k, det, chirp, bins, psi, spec, out.data());
  return out;
}

MeasurementSet synthesize(const ComplexField& obj, const PatternSet& set,
                          const DetectorModel& det, const PropagationModel& prop) {
  return synthesize_impl(obj, set, det, prop, true);
}

void apply_noise(MeasurementSet& ms, double sigma, uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("apply_noise: sigma must be >= 0");
  if (sigma == 0.0) return;
  for (int k = 0; k < ms.count; ++k)
    for (int c = 0; c < ms.channels; ++c) {
      double noisy = ms.at(k, c) + sigma * rng::gaussian(seed, rng::Stream::noise, k, c);
      ms.at(k, c) = std::max(0.0, noisy);
    }
}

RealMap measure_cdi_reference(const ComplexField& obj) {
  Spectrum s = dft2(obj);
  RealMap map(obj.side);
  for (long p = 0; p < map.n(); ++p) map.data[p] = std::norm(s.data[p]);
  return map;
}

DynamicRange dynamic_range(const std::vector<double>& values) {
  DynamicRange dr;
  double mn = 0.0, mx = 0.0;
  bool seen = false;
  for (double v : values) {
    if (v > 0.0) {
      if (!seen) {
        mn = mx = v;
        seen = true;
      } else {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
    } else {
      ++dr.excluded;
    }
  }
  if (!seen) throw std::invalid_argument("dynamic_range: no strictly positive values");
  dr.value = mx / mn;
  return dr;
}

uint64_t field_hash(const ComplexField& field) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(field.data.data());
  const std::size_t len = field.data.size() * sizeof(cplx);
  uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

void save_measurements(const MeasurementSet& ms, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_measurements: cannot open " + path);
  std::fputs("k,channel_i,channel_j,intensity\n", f);
  char buf[64];
  for (int k = 0; k < ms.count; ++k)
    for (int c = 0; c < ms.channels; ++c) {
      const BinOffset& o = ms.channel_labels[c];
      auto res = std::to_chars(buf, buf + sizeof(buf), ms.at(k, c));
      *res.ptr = '\0';
      std::fprintf(f, "%d,%d,%d,%s\n", k, o.i, o.j, buf);
    }
  std::fclose(f);

  std::FILE* p = std::fopen((path + ".prov").c_str(), "wb");
  if (!p) throw std::runtime_error("save_measurements: cannot open " + path + ".prov");
  std::fprintf(p, "object=%016llx patterns=%llu detector=%s propagation=%s\n",
               static_cast<unsigned long long>(ms.prov.object_hash),
               static_cast<unsigned long long>(ms.prov.pattern_seed), ms.prov.detector.c_str(),
               ms.prov.propagation.c_str());
  std::fclose(p);
}

MeasurementSet load_measurements(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load_measurements: cannot open " + path);
  std::string content;
  char chunk[4096];
  std::size_t got;
  while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) content.append(chunk, got);
  std::fclose(f);

  const char* expect = "k,channel_i,channel_j,intensity\n";
  if (content.rfind(expect, 0) != 0)
    throw FormatError("load_measurements: bad CSV header in " + path, 0);

  MeasurementSet ms;
  std::vector<double> vals;
  std::vector<BinOffset> labels;
  std::vector<int> ks;
  std::size_t pos = std::strlen(expect);
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos)
      throw FormatError("load_measurements: unterminated row in " + path, pos);
    const char* b = content.data() + pos;
    const char* e = content.data() + eol;
    int k, i, j;
    double v;
    auto r1 = std::from_chars(b, e, k);
    if (r1.ec != std::errc{} || r1.ptr >= e || *r1.ptr != ',')
      throw FormatError("load_measurements: bad row in " + path, pos);
    auto r2 = std::from_chars(r1.ptr + 1, e, i);
    if (r2.ec != std::errc{} || r2.ptr >= e || *r2.ptr != ',')
      throw FormatError("load_measurements: bad row in " + path, pos);
    auto r3 = std::from_chars(r2.ptr + 1, e, j);
    if (r3.ec != std::errc{} || r3.ptr >= e || *r3.ptr != ',')
      throw FormatError("load_measurements: bad row in " + path, pos);
    auto r4 = std::from_chars(r3.ptr + 1, e, v);
    if (r4.ec != std::errc{} || r4.ptr != e)
      throw FormatError("load_measurements: bad intensity in " + path, pos);
    ks.push_back(k);
    labels.push_back({i, j});
    vals.push_back(v);
    pos = eol + 1;
  }
  if (vals.empty()) throw FormatError("load_measurements: no rows in " + path, pos);

  // Rows must come in k-major blocks with a constant channel count.
  int c = 0;
  while (c < static_cast<int>(ks.size()) && ks[c] == 0) ++c;
  if (c == 0 || vals.size() % c != 0)
    throw FormatError("load_measurements: inconsistent channel blocks in " + path, 0);
  ms.channels = c;
  ms.count = static_cast<int>(vals.size()) / c;
  for (int k = 0; k < ms.count; ++k)
    for (int cc = 0; cc < c; ++cc)
      if (ks[static_cast<std::size_t>(k) * c + cc] != k)
        throw FormatError("load_measurements: rows out of order in " + path, 0);
  ms.channel_labels.assign(labels.begin(), labels.begin() + c);
  ms.data = std::move(vals);
  return ms;
}

}  // namespace spcdi

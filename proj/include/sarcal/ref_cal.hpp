#pragma once

// Foreground LUT calibration of the reference converter: capture an
// overdriven low-frequency sine, reconstruct transition levels from the code
// histogram, normalize them to the straight line through the end points,
// average over repeated captures and map every code to the ideal-code value
// of its bin centre.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sarcal/adc_model.hpp"
#include "sarcal/error.hpp"
#include "sarcal/histogram.hpp"
#include "sarcal/signal_gen.hpp"

namespace sarcal {

inline constexpr int kLutFractionBits = 8;

struct Lut {
  std::vector<double> map;  // map[k] = corrected code for raw code k
  int resolution_bits = 12;
  int runs = 0;
  std::size_t samples_per_run = 0;
  std::uint64_t seed = 0;
  std::string stimulus;

  static Lut identity(int bits) {
    Lut l;
    l.resolution_bits = bits;
    l.map.resize(std::size_t{1} << bits);
    for (std::size_t k = 0; k < l.map.size(); ++k) l.map[k] = static_cast<double>(k);
    return l;
  }

  double operator()(int code) const {
    if (code < 0 || static_cast<std::size_t>(code) >= map.size())
      throw UsageError("apply_lut: code " + std::to_string(code) + " out of range");
    return map[static_cast<std::size_t>(code)];
  }

  void validate() const {
    if (map.size() != (std::size_t{1} << resolution_bits))
      throw ConfigError("lut", "map length must be 2^N");
    for (std::size_t k = 0; k < map.size(); ++k) {
      if (!std::isfinite(map[k])) throw ConfigError("lut", "non-finite entry");
      if (k > 0 && map[k] < map[k - 1]) throw ConfigError("lut", "map is not monotone");
    }
  }
};

inline double apply_lut(const Lut& lut, int code) { return lut(code); }

inline std::vector<double> apply_lut(const Lut& lut, std::span<const int> codes) {
  std::vector<double> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) out[i] = lut(codes[i]);
  return out;
}

/// LUT from averaged endpoint-normalized transition positions
/// (positions[k-1] is transition k in ideal-code units).
inline Lut lut_from_positions(std::span<const double> positions, int bits) {
  const std::size_t n_trans = (std::size_t{1} << bits) - 1;
  if (positions.size() != n_trans) throw UsageError("lut_from_positions: wrong length");
  const double q = std::ldexp(1.0, kLutFractionBits);
  Lut lut;
  lut.resolution_bits = bits;
  lut.map.resize(n_trans + 1);
  // Rails: extrapolate half a code beyond the outermost transitions.
  lut.map[0] = positions[0] - 0.5;
  lut.map[n_trans] = positions[n_trans - 1] + 0.5;
  for (std::size_t k = 1; k < n_trans; ++k)
    lut.map[k] = 0.5 * (positions[k - 1] + positions[k]);
  for (double& v : lut.map) v = std::round(v * q) / q;
  return lut;
}

struct LutOptions {
  int runs = 100;
  std::size_t samples_per_run = std::size_t{1} << 18;
};

/// Sub-seed for run r; runs are independent and order-free.
inline std::uint64_t run_seed(std::uint64_t seed, int run) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(run + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-run endpoint-normalized transition positions; exposed for tests that
/// look at run-to-run spread.
inline std::vector<double> measure_positions(const AdcInstance& adc, const Signal& stimulus,
                                             std::size_t samples, std::uint64_t seed) {
  AdcInstance copy = adc;
  copy.reseed_noise(seed);
  copy.restart_clock();
  const CodeStream s = convert_stream(copy, stimulus, samples);
  const auto t = transitions_from_histogram(s.codes, s.resolution_bits, stimulus);
  return endpoint_normalize(t);
}

inline Lut build_lut(const AdcInstance& adc, const Signal& stimulus, const LutOptions& opt,
                     std::uint64_t seed) {
  if (opt.runs < 1) throw UsageError("build_lut: runs must be >= 1");
  const int bits = adc.config().resolution_bits;
  const std::size_t n_trans = (std::size_t{1} << bits) - 1;
  std::vector<double> sum(n_trans, 0.0);
  for (int r = 0; r < opt.runs; ++r) {
    const auto pos = measure_positions(adc, stimulus, opt.samples_per_run, run_seed(seed, r));
    for (std::size_t k = 0; k < n_trans; ++k) sum[k] += pos[k];
  }
  for (double& v : sum) v /= static_cast<double>(opt.runs);
  Lut lut = lut_from_positions(sum, bits);
  lut.runs = opt.runs;
  lut.samples_per_run = opt.samples_per_run;
  lut.seed = seed;
  lut.stimulus = "sine A=" + std::to_string(stimulus.amplitudes.at(0)) +
                 " V f=" + std::to_string(stimulus.frequencies.at(0)) + " Hz";
  return lut;
}

}  // namespace sarcal

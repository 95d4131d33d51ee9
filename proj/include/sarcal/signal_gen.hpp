#pragma once

// Deterministic test stimuli: coherent single tones, two-tone stimuli, DC
// levels and overdriven sines for code-density testing.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sarcal/error.hpp"

namespace sarcal {

enum class SignalKind { dc, single_tone, two_tone };

inline const char* to_string(SignalKind k) {
  switch (k) {
    case SignalKind::dc: return "dc";
    case SignalKind::single_tone: return "single_tone";
    case SignalKind::two_tone: return "two_tone";
  }
  return "?";
}

inline SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "dc") return SignalKind::dc;
  if (s == "single_tone") return SignalKind::single_tone;
  if (s == "two_tone") return SignalKind::two_tone;
  throw ConfigError("signal.kind", "unknown signal kind '" + s + "'");
}

/// Sum of sinusoids plus an offset. Each component is A*sin(2*pi*f*t + phase).
struct Signal {
  SignalKind kind = SignalKind::dc;
  std::vector<double> amplitudes;
  std::vector<double> frequencies;
  std::vector<double> phases;
  double dc_offset = 0.0;

  double operator()(double t) const {
    double v = dc_offset;
    for (std::size_t i = 0; i < amplitudes.size(); ++i)
      v += amplitudes[i] *
           std::sin(2.0 * std::numbers::pi * frequencies[i] * t + phases[i]);
    return v;
  }

  /// Largest possible excursion from the offset.
  double peak() const {
    double p = 0.0;
    for (double a : amplitudes) p += a;
    return p;
  }

  void validate() const {
    if (amplitudes.size() != frequencies.size() ||
        amplitudes.size() != phases.size())
      throw ConfigError("signal", "amplitudes/frequencies/phases length mismatch");
    const std::size_t want = kind == SignalKind::dc ? 0 : kind == SignalKind::single_tone ? 1 : 2;
    if (amplitudes.size() != want)
      throw ConfigError("signal", std::string("wrong component count for ") + to_string(kind));
    for (double a : amplitudes)
      if (!(a >= 0.0) || !std::isfinite(a))
        throw ConfigError("signal.amplitudes", "amplitudes must be finite and >= 0");
    for (double f : frequencies)
      if (!(f > 0.0) || !std::isfinite(f))
        throw ConfigError("signal.frequencies", "frequencies must be finite and > 0");
  }
};

inline double evaluate(const Signal& s, double t) { return s(t); }

inline Signal dc_signal(double level) {
  Signal s;
  s.kind = SignalKind::dc;
  s.dc_offset = level;
  return s;
}

inline Signal single_tone(double amplitude, double frequency, double phase = 0.0,
                          double offset = 0.0) {
  Signal s;
  s.kind = SignalKind::single_tone;
  s.amplitudes = {amplitude};
  s.frequencies = {frequency};
  s.phases = {phase};
  s.dc_offset = offset;
  return s;
}

inline Signal two_tone(double a1, double f1, double a2, double f2,
                       double phase1 = 0.0, double phase2 = 0.0) {
  Signal s;
  s.kind = SignalKind::two_tone;
  s.amplitudes = {a1, a2};
  s.frequencies = {f1, f2};
  s.phases = {phase1, phase2};
  return s;
}

struct CoherentBin {
  std::int64_t bin;
  double f_actual;
};

/// Odd FFT bin nearest to f_target. For a power-of-two record every odd bin
/// is coprime with the record length, so the tone visits n_fft distinct
/// phases. Ties go to the lower bin.
inline CoherentBin coherent_bin(double fs, std::int64_t n_fft, double f_target) {
  if (n_fft < 4 || (n_fft & (n_fft - 1)) != 0)
    throw UsageError("coherent_bin: n_fft must be a power of two >= 4");
  if (!(fs > 0.0)) throw UsageError("coherent_bin: fs must be > 0");
  if (!(f_target > 0.0 && f_target < fs / 2.0))
    throw UsageError("coherent_bin: f_target must lie in (0, fs/2)");
  const double x = f_target * static_cast<double>(n_fft) / fs;
  auto lo = static_cast<std::int64_t>(std::floor(x));
  if (lo % 2 == 0) --lo;  // largest odd <= x
  std::int64_t hi = lo + 2;
  std::int64_t bin = (x - static_cast<double>(lo) <= static_cast<double>(hi) - x) ? lo : hi;
  if (bin < 1) bin = 1;
  if (bin >= n_fft / 2) bin = n_fft / 2 - 1;
  return {bin, static_cast<double>(bin) * fs / static_cast<double>(n_fft)};
}

/// Sine overdriving a full scale of +/- full_scale by the given fraction,
/// for code-density (histogram) testing.
inline Signal histogram_stimulus(double full_scale, double frequency,
                                 double overdrive = 0.02) {
  return single_tone(full_scale * (1.0 + overdrive), frequency, 0.0, 0.0);
}

}  // namespace sarcal

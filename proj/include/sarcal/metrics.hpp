#pragma once

// Dynamic and static converter metrics: coherent FFT (rectangular window),
// SNDR/SFDR/THD/ENOB, sine-histogram DNL/INL, two-tone IM2/IM3 and the
// Walden figure of merit.

#include <Eigen/Dense>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "sarcal/error.hpp"
#include "sarcal/histogram.hpp"
#include "sarcal/signal_gen.hpp"

namespace sarcal {

inline double db10(double ratio) { return 10.0 * std::log10(ratio); }

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// One-sided power spectrum with sum(result) == mean square of the input.
inline std::vector<double> power_spectrum(std::span<const double> x) {
  const std::size_t n = x.size();
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in);
  fftw_execute(plan);
  std::vector<double> p(n / 2 + 1);
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    p[k] = mag2 * norm * (edge ? 1.0 : 2.0);
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return p;
}

/// Fold an arbitrary bin index into [0, n/2].
inline std::int64_t fold_bin(std::int64_t b, std::int64_t n) {
  b %= n;
  if (b < 0) b += n;
  return b > n / 2 ? n - b : b;
}

}  // namespace detail

struct SpectrumReport {
  std::vector<double> power;  // one-sided, mean-removed, sums to variance
  std::int64_t n_fft = 0;
  std::int64_t signal_bin = 0;
  std::int64_t spur_bin = 0;
  double signal_power = 0.0;
  double sndr_db = 0.0;
  double sfdr_db = 0.0;
  double thd_db = 0.0;
  double enob_bits = 0.0;
  bool signal_bin_suspect = false;  // another bin holds more power

  /// Bin power relative to the signal, dBc.
  double power_dbc(std::size_t k) const {
    return db10(std::max(power[k], 1e-300) / signal_power);
  }
};

inline constexpr int kThdHarmonics = 5;

inline SpectrumReport spectrum(std::span<const double> data, std::int64_t n_fft,
                               std::int64_t signal_bin) {
  if (n_fft < 8 || static_cast<std::int64_t>(data.size()) < n_fft)
    throw UsageError("spectrum: stream shorter than n_fft");
  if (signal_bin <= 0 || signal_bin >= n_fft / 2)
    throw UsageError("spectrum: signal_bin must lie in (0, n_fft/2)");
  auto x = data.first(static_cast<std::size_t>(n_fft));
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n_fft);
  std::vector<double> centered(x.begin(), x.end());
  for (double& v : centered) v -= mean;

  SpectrumReport r;
  r.power = detail::power_spectrum(centered);
  r.n_fft = n_fft;
  r.signal_bin = signal_bin;
  const auto sb = static_cast<std::size_t>(signal_bin);
  r.signal_power = r.power[sb];

  double nad = 0.0;
  double spur = 0.0;
  std::size_t spur_bin = 1;
  for (std::size_t k = 1; k < r.power.size(); ++k) {
    if (k == sb) continue;
    nad += r.power[k];
    if (r.power[k] > spur) {
      spur = r.power[k];
      spur_bin = k;
    }
  }
  double harm = 0.0;
  for (int h = 2; h <= kThdHarmonics; ++h) {
    const auto hb = static_cast<std::size_t>(detail::fold_bin(h * signal_bin, n_fft));
    if (hb != 0 && hb != sb) harm += r.power[hb];
  }
  r.spur_bin = static_cast<std::int64_t>(spur_bin);
  r.sndr_db = db10(r.signal_power / std::max(nad, 1e-300));
  r.sfdr_db = db10(r.signal_power / std::max(spur, 1e-300));
  r.thd_db = db10(std::max(harm, 1e-300) / r.signal_power);
  r.enob_bits = (r.sndr_db - 1.76) / 6.02;
  r.signal_bin_suspect = spur > r.signal_power;
  return r;
}

inline SpectrumReport spectrum(std::span<const int> codes, std::int64_t n_fft,
                               std::int64_t signal_bin) {
  std::vector<double> x(codes.begin(), codes.end());
  return spectrum(std::span<const double>(x), n_fft, signal_bin);
}

struct LinearityReport {
  std::vector<double> dnl;          // codes 1 .. 2^N-2
  std::vector<double> inl;          // transitions 1 .. 2^N-1, endpoints 0
  double max_abs_dnl = 0.0;
  double inl_extreme = 0.0;         // signed value with largest magnitude
  double max_abs_inl = 0.0;
  std::vector<int> missing_codes;
};

/// DNL/INL from transition levels (volts or any linear unit), endpoint fit.
inline LinearityReport linearity_from_transitions(std::span<const double> transitions) {
  const auto pos = endpoint_normalize(transitions);  // pos[k-1] ~ k - 0.5
  LinearityReport r;
  const std::size_t n_trans = pos.size();
  r.dnl.resize(n_trans - 1);
  for (std::size_t k = 0; k + 1 < n_trans; ++k) {
    r.dnl[k] = (pos[k + 1] - pos[k]) - 1.0;
    if (pos[k + 1] - pos[k] <= 0.0) r.missing_codes.push_back(static_cast<int>(k + 1));
    r.max_abs_dnl = std::max(r.max_abs_dnl, std::abs(r.dnl[k]));
  }
  r.inl.resize(n_trans);
  for (std::size_t k = 0; k < n_trans; ++k) {
    r.inl[k] = pos[k] - (static_cast<double>(k) + 0.5);
    if (std::abs(r.inl[k]) > r.max_abs_inl) {
      r.max_abs_inl = std::abs(r.inl[k]);
      r.inl_extreme = r.inl[k];
    }
  }
  return r;
}

inline LinearityReport dnl_inl_sine(std::span<const int> codes, int bits, const Signal& stimulus) {
  return linearity_from_transitions(transitions_from_histogram(codes, bits, stimulus));
}

/// Fractional streams are re-quantized onto the integer code grid first.
inline std::vector<int> requantize(std::span<const double> x, int bits) {
  const int top = (1 << bits) - 1;
  std::vector<int> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    q[i] = static_cast<int>(std::clamp(std::lround(x[i]), 0L, static_cast<long>(top)));
  return q;
}

inline LinearityReport dnl_inl_sine(std::span<const double> codes, int bits,
                                    const Signal& stimulus) {
  const auto q = requantize(codes, bits);
  return dnl_inl_sine(std::span<const int>(q), bits, stimulus);
}

struct IntermodReport {
  double im2_db = 0.0;
  double im3_db = 0.0;
  double tone_power = 0.0;
  std::int64_t bin1 = 0, bin2 = 0;
};

inline IntermodReport im2_im3_bins(std::span<const double> data, std::int64_t n_fft,
                                   std::int64_t bin1, std::int64_t bin2) {
  if (bin1 == bin2) throw UsageError("im2_im3: tones must differ");
  if (static_cast<std::int64_t>(data.size()) < n_fft)
    throw UsageError("im2_im3: stream shorter than n_fft");
  const std::int64_t im2[] = {detail::fold_bin(bin1 - bin2, n_fft),
                              detail::fold_bin(bin1 + bin2, n_fft)};
  const std::int64_t im3[] = {detail::fold_bin(2 * bin1 - bin2, n_fft),
                              detail::fold_bin(2 * bin2 - bin1, n_fft)};
  for (auto b : {im2[0], im2[1], im3[0], im3[1]})
    if (b == 0 || b == bin1 || b == bin2)
      throw ConfigError("two_tone", "intermodulation bin collides with a tone or DC");

  auto x = data.first(static_cast<std::size_t>(n_fft));
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n_fft);
  std::vector<double> centered(x.begin(), x.end());
  for (double& v : centered) v -= mean;
  const auto p = detail::power_spectrum(centered);

  IntermodReport r;
  r.bin1 = bin1;
  r.bin2 = bin2;
  r.tone_power = 0.5 * (p[static_cast<std::size_t>(bin1)] + p[static_cast<std::size_t>(bin2)]);
  const double p2 = std::max(p[static_cast<std::size_t>(im2[0])], p[static_cast<std::size_t>(im2[1])]);
  const double p3 = std::max(p[static_cast<std::size_t>(im3[0])], p[static_cast<std::size_t>(im3[1])]);
  r.im2_db = db10(r.tone_power / std::max(p2, 1e-300));
  r.im3_db = db10(r.tone_power / std::max(p3, 1e-300));
  return r;
}

/// Tone frequencies must sit on bins of the n_fft record.
inline IntermodReport im2_im3(std::span<const double> data, double fs, double f1, double f2,
                              std::int64_t n_fft) {
  auto to_bin = [&](double f) {
    const double x = f * static_cast<double>(n_fft) / fs;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-6) throw UsageError("im2_im3: tone is not on an FFT bin");
    return static_cast<std::int64_t>(r);
  };
  return im2_im3_bins(data, n_fft, to_bin(f1), to_bin(f2));
}

/// Walden FoM in joules per conversion step.
inline double fom_walden(double power_w, double sndr_db, double fs) {
  if (!(power_w > 0.0) || !(fs > 0.0)) throw UsageError("fom_walden: inputs must be positive");
  return power_w / (std::pow(2.0, (sndr_db - 1.76) / 6.02) * fs);
}

struct SineFit {
  double amplitude = 0.0;
  double phase = 0.0;  // of a*sin(w n + phase)
  double offset = 0.0;
  double rms_residual = 0.0;
};

/// Three-parameter least-squares sine fit at a known normalized frequency
/// (cycles per sample).
inline SineFit sine_fit(std::span<const double> x, double cycles_per_sample) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 3) throw UsageError("sine_fit: need at least 3 samples");
  const double w = 2.0 * std::numbers::pi * cycles_per_sample;
  Eigen::MatrixXd basis(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    basis(i, 0) = std::sin(w * static_cast<double>(i));
    basis(i, 1) = std::cos(w * static_cast<double>(i));
    basis(i, 2) = 1.0;
  }
  const Eigen::Map<const Eigen::VectorXd> y(x.data(), n);
  const Eigen::Vector3d sol = basis.colPivHouseholderQr().solve(y);
  SineFit f;
  f.amplitude = std::hypot(sol(0), sol(1));
  f.phase = std::atan2(sol(1), sol(0));
  f.offset = sol(2);
  f.rms_residual = std::sqrt((y - basis * sol).squaredNorm() / static_cast<double>(n));
  return f;
}

}  // namespace sarcal

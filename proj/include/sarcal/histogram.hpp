#pragma once

// Code-density (histogram) reconstruction of converter transition levels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "sarcal/error.hpp"
#include "sarcal/signal_gen.hpp"

namespace sarcal {

/// Cumulative histogram: ch[k] = number of codes < k, k = 0..num_codes.
inline std::vector<std::int64_t> cumulative_histogram(std::span<const int> codes, int bits) {
  const std::int64_t n_codes = std::int64_t{1} << bits;
  std::vector<std::int64_t> hist(static_cast<std::size_t>(n_codes), 0);
  for (int c : codes) {
    if (c < 0 || c >= n_codes) throw UsageError("cumulative_histogram: code out of range");
    ++hist[static_cast<std::size_t>(c)];
  }
  std::vector<std::int64_t> ch(static_cast<std::size_t>(n_codes) + 1, 0);
  for (std::size_t k = 0; k < hist.size(); ++k) ch[k + 1] = ch[k] + hist[k];
  return ch;
}

namespace detail {
inline void require_rails(std::span<const int> codes, int bits) {
  if (codes.empty()) throw UsageError("histogram: empty code stream");
  const int top = (1 << bits) - 1;
  const auto [lo, hi] = std::minmax_element(codes.begin(), codes.end());
  if (*lo != 0 || *hi != top)
    throw MeasurementError("histogram: codes never reach both rails (insufficient overdrive)");
}
}  // namespace detail

/// Transition levels T(1..2^N-1) in volts (index 0 holds T(1)) from a capture
/// of an overdriven sine:  T(k) = offset - A cos(pi * CH(k) / S).
inline std::vector<double> transitions_from_histogram(std::span<const int> codes, int bits,
                                                      const Signal& stimulus) {
  if (stimulus.kind != SignalKind::single_tone || stimulus.amplitudes.size() != 1)
    throw UsageError("transitions_from_histogram: stimulus must be a single sine");
  detail::require_rails(codes, bits);
  const auto ch = cumulative_histogram(codes, bits);
  const double s = static_cast<double>(codes.size());
  const double a = stimulus.amplitudes[0];
  const std::size_t n_trans = (std::size_t{1} << bits) - 1;
  std::vector<double> t(n_trans);
  for (std::size_t k = 1; k <= n_trans; ++k)
    t[k - 1] = stimulus.dc_offset -
               a * std::cos(std::numbers::pi * static_cast<double>(ch[k]) / s);
  return t;
}

/// Same reconstruction for a linear ramp from v_start to v_end.
inline std::vector<double> transitions_from_ramp(std::span<const int> codes, int bits,
                                                 double v_start, double v_end) {
  detail::require_rails(codes, bits);
  const auto ch = cumulative_histogram(codes, bits);
  const double s = static_cast<double>(codes.size());
  const std::size_t n_trans = (std::size_t{1} << bits) - 1;
  std::vector<double> t(n_trans);
  for (std::size_t k = 1; k <= n_trans; ++k)
    t[k - 1] = v_start + (v_end - v_start) * static_cast<double>(ch[k]) / s;
  return t;
}

/// Transition positions in ideal-code units under the straight line through
/// the first and last transition: result[0] = 0.5, result.back() = 2^N - 1.5.
inline std::vector<double> endpoint_normalize(std::span<const double> transitions) {
  const std::size_t n = transitions.size();
  if (n < 2) throw UsageError("endpoint_normalize: need at least two transitions");
  const double step = (transitions[n - 1] - transitions[0]) / static_cast<double>(n - 1);
  if (!(step > 0.0)) throw MeasurementError("endpoint_normalize: degenerate transfer function");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = (transitions[k] - transitions[0]) / step + 0.5;
  return out;
}

}  // namespace sarcal

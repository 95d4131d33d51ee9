#pragma once

// Feature vectors and supervised error targets built at the instants where
// the main and reference converters sample together (every `ratio`-th main
// sample).
//
// Feature layout for one instant k (normalized codes x):
//   [ x[k], x[k-1], ..., x[k-past], x[k] - x[k-1] ]
// with past = m - 2 when the derivative is included, m - 1 otherwise.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sarcal/adc_model.hpp"
#include "sarcal/error.hpp"

namespace sarcal {

struct FeatureSpec {
  int m = 41;
  bool include_derivative = true;
  int resolution_bits = 12;

  int past_samples() const { return include_derivative ? m - 2 : m - 1; }

  void validate() const {
    if (m < 2) throw ConfigError("features.m", "must be >= 2");
    if (resolution_bits < 1 || resolution_bits > 24)
      throw ConfigError("features.resolution_bits", "must be in [1, 24]");
  }
};

/// Codes map onto [-1, 1) with midscale at exactly 0; the scale is a power of
/// two so the mapping round-trips exactly.
inline double normalize_code(double code, int bits) {
  const double half = static_cast<double>(std::int64_t{1} << (bits - 1));
  return (code - half) / half;
}

inline double denormalize_code(double x, int bits) {
  const double half = static_cast<double>(std::int64_t{1} << (bits - 1));
  return x * half + half;
}

/// LSB size in normalized units.
inline double normalized_lsb(int bits) {
  return 1.0 / static_cast<double>(std::int64_t{1} << (bits - 1));
}

inline std::vector<double> normalize_codes(std::span<const int> codes, int bits) {
  std::vector<double> x(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) x[i] = normalize_code(codes[i], bits);
  return x;
}

inline std::vector<std::size_t> aligned_indices(std::size_t n_main, std::size_t ratio = 8,
                                                std::size_t phase = 0) {
  if (ratio == 0 || phase >= ratio) throw UsageError("aligned_indices: need 0 <= phase < ratio");
  std::vector<std::size_t> idx;
  for (std::size_t k = phase; k < n_main; k += ratio) idx.push_back(k);
  return idx;
}

/// Writes the feature vector for instant k into `out` (length m). Returns
/// false when k lacks the required history; `out` is untouched then.
inline bool write_features(std::span<const double> x, std::size_t k, const FeatureSpec& spec,
                           std::span<double> out) {
  const auto past = static_cast<std::size_t>(spec.past_samples());
  if (k < past || k >= x.size()) return false;
  if (out.size() != static_cast<std::size_t>(spec.m))
    throw UsageError("write_features: output length must equal m");
  for (std::size_t j = 0; j <= past; ++j) out[j] = x[k - j];
  if (spec.include_derivative) out[past + 1] = x[k] - x[k - 1];
  return true;
}

inline std::vector<double> make_features(std::span<const double> normalized, std::size_t k,
                                         const FeatureSpec& spec) {
  std::vector<double> f(static_cast<std::size_t>(spec.m));
  if (!write_features(normalized, k, spec, f))
    throw UsageError("make_features: index " + std::to_string(k) + " lacks history");
  return f;
}

inline std::vector<double> make_features(const CodeStream& main, std::size_t k,
                                         const FeatureSpec& spec) {
  const auto x = normalize_codes(main.codes, main.resolution_bits);
  return make_features(std::span<const double>(x), k, spec);
}

struct TrainingSet {
  std::size_t cols = 0;
  std::vector<double> features;  // row-major, rows() x cols
  std::vector<double> targets;   // normalized code units
  std::vector<std::size_t> indices;

  std::size_t rows() const { return targets.size(); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(features).subspan(r * cols, cols);
  }
  void push(std::span<const double> f, double target, std::size_t index) {
    features.insert(features.end(), f.begin(), f.end());
    targets.push_back(target);
    indices.push_back(index);
  }
};

/// One row per aligned instant with full history:
///   target = normalized(ref_corrected[k / ratio]) - normalized(main[k]).
inline TrainingSet build_training_set(const CodeStream& main,
                                      std::span<const double> ref_corrected,
                                      const FeatureSpec& spec, std::size_t ratio = 8,
                                      std::size_t phase = 0) {
  spec.validate();
  const std::size_t n = main.size();
  const auto idx = aligned_indices(n, ratio, phase);
  if (ref_corrected.size() < idx.size())
    throw UsageError("build_training_set: reference stream too short for main stream");
  const int bits = main.resolution_bits;
  const auto x = normalize_codes(main.codes, bits);

  TrainingSet set;
  set.cols = static_cast<std::size_t>(spec.m);
  std::vector<double> f(set.cols);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const std::size_t k = idx[j];
    if (!write_features(x, k, spec, f)) continue;
    set.push(f, normalize_code(ref_corrected[j], bits) - x[k], k);
  }
  return set;
}

}  // namespace sarcal

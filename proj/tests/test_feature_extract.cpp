#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "sarcal/feature_extract.hpp"

using namespace sarcal;

namespace {

CodeStream stream_of(std::vector<int> codes, int bits = 12) {
  CodeStream s;
  s.codes = std::move(codes);
  s.times.resize(s.codes.size());
  for (std::size_t i = 0; i < s.times.size(); ++i) s.times[i] = i / 84e6;
  s.fs = 84e6;
  s.resolution_bits = bits;
  return s;
}

std::vector<int> ramp_codes(int n) {
  std::vector<int> c(n);
  for (int i = 0; i < n; ++i) c[i] = (i * 37) % 4096;
  return c;
}

}  // namespace

TEST(FeatureExtract, AlignedIndices) {
  EXPECT_EQ(aligned_indices(20, 8, 0), (std::vector<std::size_t>{0, 8, 16}));
  EXPECT_EQ(aligned_indices(20, 8, 3), (std::vector<std::size_t>{3, 11, 19}));
  EXPECT_EQ(aligned_indices(16, 8, 0).size(), 2u);
  EXPECT_THROW(aligned_indices(20, 8, 8), UsageError);
  EXPECT_THROW(aligned_indices(20, 0, 0), UsageError);
}

TEST(FeatureExtract, Normalization) {
  EXPECT_EQ(normalize_code(2048, 12), 0.0);
  EXPECT_EQ(normalize_code(0, 12), -1.0);
  EXPECT_EQ(normalize_code(4095, 12), 1.0 - 1.0 / 2048);
  EXPECT_EQ(normalized_lsb(12), 1.0 / 2048);
  for (int c = 0; c < 4096; ++c) ASSERT_EQ(denormalize_code(normalize_code(c, 12), 12), c);
}

TEST(FeatureExtract, MidscaleGivesZeroFeatures) {
  const auto s = stream_of(std::vector<int>(100, 2048));
  for (double f : make_features(s, 60, FeatureSpec{})) EXPECT_EQ(f, 0.0);
}

TEST(FeatureExtract, ThreeInputLayout) {
  const auto s = stream_of({2048, 3072, 1024});
  FeatureSpec spec;
  spec.m = 3;
  const auto f = make_features(s, 2, spec);
  EXPECT_EQ(f, (std::vector<double>{-0.5, 0.5, -1.0}));
  spec.include_derivative = false;
  EXPECT_EQ(make_features(s, 2, spec), (std::vector<double>{-0.5, 0.5, 0.0}));
  EXPECT_THROW(make_features(s, 1, spec), UsageError);
}

TEST(FeatureExtract, DefaultLayout) {
  const auto s = stream_of(ramp_codes(200));
  const FeatureSpec spec;
  ASSERT_EQ(spec.past_samples(), 39);
  const std::size_t k = 120;
  const auto f = make_features(s, k, spec);
  ASSERT_EQ(f.size(), 41u);
  for (int j = 0; j <= 39; ++j) EXPECT_EQ(f[j], (s.codes[k - j] - 2048) / 2048.0) << j;
  EXPECT_EQ(f[40], (s.codes[k] - s.codes[k - 1]) / 2048.0);
  EXPECT_THROW(make_features(s, 38, spec), UsageError);
  EXPECT_NO_THROW(make_features(s, 39, spec));
}

TEST(FeatureExtract, FeaturesAreCausal) {
  auto codes = ramp_codes(300);
  const auto a = make_features(stream_of(codes), 150, FeatureSpec{});
  for (std::size_t i = 151; i < codes.size(); ++i) codes[i] = 7;
  EXPECT_EQ(make_features(stream_of(codes), 150, FeatureSpec{}), a);
}

TEST(FeatureExtract, WriteFeaturesChecksLength) {
  const auto x = normalize_codes(ramp_codes(100), 12);
  std::vector<double> out(40);
  EXPECT_THROW(write_features(x, 60, FeatureSpec{}, out), UsageError);
  std::vector<double> ok(41, -9.0);
  EXPECT_FALSE(write_features(x, 10, FeatureSpec{}, ok));
  EXPECT_EQ(ok[0], -9.0);
}

TEST(FeatureExtract, RowCountAndPhase) {
  const auto s = stream_of(ramp_codes(1000));
  const std::vector<double> ref(200, 2048.0);
  const auto set = build_training_set(s, ref, FeatureSpec{}, 8, 0);
  // Aligned 0, 8, ..., 992; the first five lack 39 samples of history.
  EXPECT_EQ(set.rows(), 120u);
  EXPECT_EQ(set.indices.front(), 40u);
  EXPECT_EQ(set.cols, 41u);
  EXPECT_EQ(set.features.size(), 120u * 41u);

  const auto p = build_training_set(s, ref, FeatureSpec{}, 8, 7);
  EXPECT_EQ(p.indices.front(), 39u);
  EXPECT_EQ(p.rows(), 121u);
  for (std::size_t r = 0; r < p.rows(); ++r) EXPECT_EQ(p.indices[r] % 8, 7u);
}

TEST(FeatureExtract, TargetsFromReference) {
  const auto s = stream_of(ramp_codes(800));
  const auto idx = aligned_indices(800, 8, 0);
  std::vector<double> same, shifted;
  for (std::size_t k : idx) {
    same.push_back(s.codes[k]);
    shifted.push_back(s.codes[k] - 3.25);
  }
  const auto a = build_training_set(s, same, FeatureSpec{});
  for (double t : a.targets) EXPECT_EQ(t, 0.0);
  // Main reads 3.25 codes high against the reference.
  const auto b = build_training_set(s, shifted, FeatureSpec{});
  for (double t : b.targets) EXPECT_DOUBLE_EQ(t, -3.25 / 2048);
  for (std::size_t r = 0; r < b.rows(); ++r)
    EXPECT_EQ(b.row(r)[0], normalize_code(s.codes[b.indices[r]], 12));
}

TEST(FeatureExtract, ShortReferenceIsUsageError) {
  const auto s = stream_of(ramp_codes(800));
  EXPECT_THROW(build_training_set(s, std::vector<double>(99, 0.0), FeatureSpec{}), UsageError);
  FeatureSpec bad;
  bad.m = 1;
  EXPECT_THROW(build_training_set(s, std::vector<double>(100, 0.0), bad), ConfigError);
}

TEST(FeatureExtract, StaticMismatchTargetsMatchDcSweep) {
  AdcConfig c;
  c.resolution_bits = 10;
  c.bit_weights = binary_bit_weights(10);
  c.cap_mismatch_sigma = 0.02;
  c.temperature = 0.0;
  const double to_codes = 1.0 / c.lsb();

  // Oracle: mean input of each code over a dense DC sweep, in code units.
  std::map<int, std::pair<double, int>> centre;
  {
    AdcInstance a = build_instance(c, {}, 11);
    const int n = 1 << 22;
    for (int i = 0; i < n; ++i) {
      const double v = -0.5 + (i + 0.5) / n;
      auto& e = centre[a.sample_and_convert(v, i * 1e-9).code];
      e.first += v * to_codes + 512.0 - 0.5;
      e.second += 1;
    }
  }

  AdcInstance a = build_instance(c, {}, 11);
  const std::size_t n = std::size_t{1} << 20;
  const auto cb = coherent_bin(c.fs, static_cast<std::int64_t>(n), 0.2e6);
  const Signal sig = single_tone(0.499, cb.f_actual, 0.2);
  const CodeStream main = convert_stream(a, sig, n);
  std::vector<double> ref;
  for (std::size_t k : aligned_indices(n)) ref.push_back(sig(main.times[k]) * to_codes + 512.0 - 0.5);

  FeatureSpec spec;
  spec.resolution_bits = 10;
  const auto set = build_training_set(main, ref, spec);
  std::map<int, std::pair<double, int>> mean_target;
  for (std::size_t r = 0; r < set.rows(); ++r) {
    auto& e = mean_target[main.codes[set.indices[r]]];
    e.first += set.targets[r] / normalized_lsb(10);
    e.second += 1;
  }
  int checked = 0;
  for (const auto& [code, e] : mean_target) {
    // Bins near the rails are only partly covered by the tone.
    if (e.second < 40 || code < 8 || code > 1015 || !centre.count(code)) continue;
    const double oracle = centre[code].first / centre[code].second - code;
    EXPECT_NEAR(e.first / e.second, oracle, 0.1) << code;
    ++checked;
  }
  EXPECT_GT(checked, 900);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sarcal/metrics.hpp"
#include "sarcal/ref_cal.hpp"

using namespace sarcal;

namespace {

AdcConfig quiet(int bits, std::vector<int> weights) {
  AdcConfig c;
  c.resolution_bits = bits;
  c.bit_weights = std::move(weights);
  c.temperature = 0.0;
  return c;
}

std::vector<double> measured_transitions(AdcInstance adc, const Signal& s, std::size_t n) {
  const CodeStream cs = convert_stream(adc, s, n);
  return transitions_from_histogram(cs.codes, cs.resolution_bits, s);
}

// Overdriven sine with an odd number of cycles in n samples.
Signal stim(const AdcConfig& c, std::size_t n, double f = 1.03e6) {
  return histogram_stimulus(c.v_ref, coherent_bin(c.fs, static_cast<std::int64_t>(n), f).f_actual);
}

double rms(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / a.size());
}

}  // namespace

TEST(RefCal, IdealTransitionsFromHistogram) {
  const AdcConfig c = quiet(12, default_bit_weights());
  const std::size_t n = std::size_t{1} << 18;
  const auto t = measured_transitions(build_instance(c, {}, 1), stim(c, n, 100e3), n);
  for (std::size_t k = 1; k <= t.size(); ++k)
    ASSERT_NEAR(t[k - 1], -c.v_ref + (k - 0.5) * c.lsb(), 0.6 * c.lsb()) << k;
}

TEST(RefCal, MsbPerturbationShiftsUpperHalf) {
  const AdcConfig c = quiet(12, binary_bit_weights(12));
  const double delta = 0.5;
  AdcInstance nominal = build_instance(c, {}, 1);
  AdcInstance skewed = nominal;
  auto caps = skewed.cap_values();
  caps[0] = (2048 + delta) * c.unit_cap;
  skewed.set_cap_values(caps);

  const std::size_t n = std::size_t{1} << 20;
  const Signal s = stim(c, n);
  const auto t0 = measured_transitions(nominal, s, n);
  const auto t1 = measured_transitions(skewed, s, n);
  // Thresholds are in units of the (2^N)-unit scale; the MSB moves every
  // later threshold by delta and its own by delta / 2.
  for (std::size_t k = 1; k <= t0.size(); ++k) {
    const double shift = (t1[k - 1] - t0[k - 1]) / c.lsb();
    const double want = k < 2048 ? 0.0 : k == 2048 ? delta / 2 : delta;
    ASSERT_NEAR(shift, want, 0.1) << k;
  }
}

TEST(RefCal, RampAndSineAgreeUnderMismatch) {
  AdcConfig c = quiet(10, binary_bit_weights(10));
  c.cap_mismatch_sigma = 0.02;
  const AdcInstance adc = build_instance(c, {}, 4);
  const std::size_t n = std::size_t{1} << 20;
  const Signal s = stim(c, n);
  const auto ts = endpoint_normalize(measured_transitions(adc, s, n));

  AdcInstance a = adc;
  std::vector<int> ramp(n);
  const double lo = -0.51, hi = 0.51;
  for (std::size_t i = 0; i < n; ++i)
    ramp[i] = a.sample_and_convert(lo + (hi - lo) * (i + 0.5) / n, i * 1e-8).code;
  const auto tr = endpoint_normalize(transitions_from_ramp(ramp, 10, lo, hi));
  for (std::size_t k = 0; k < ts.size(); ++k) ASSERT_NEAR(ts[k], tr[k], 0.2) << k + 1;
}

TEST(RefCal, EndpointFitIgnoresAmplitudeError) {
  AdcConfig c = quiet(10, binary_bit_weights(10));
  c.cap_mismatch_sigma = 0.01;
  AdcInstance adc = build_instance(c, {}, 2);
  const Signal s = stim(c, std::size_t{1} << 16);
  const CodeStream cs = convert_stream(adc, s, std::size_t{1} << 16);
  const auto a = endpoint_normalize(transitions_from_histogram(cs.codes, 10, s));
  const auto b = endpoint_normalize(transitions_from_histogram(cs.codes, 10, single_tone(0.7, 1.0)));
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 1e-9);
  EXPECT_DOUBLE_EQ(a.front(), 0.5);
  EXPECT_NEAR(a.back(), 1022.5, 1e-12);
}

TEST(RefCal, IdealLutIsNearIdentity) {
  AdcConfig c = quiet(8, binary_bit_weights(8));
  c.comp_noise_sigma = 0.3 * c.lsb();
  const AdcInstance adc = build_instance(c, {}, 1);
  const Lut lut = build_lut(adc, stim(c, 1 << 14), {100, 1 << 14}, 9);
  ASSERT_EQ(lut.map.size(), 256u);
  for (int k = 0; k < 256; ++k) ASSERT_NEAR(lut(k), k, 0.1) << k;
  EXPECT_NO_THROW(lut.validate());
  EXPECT_EQ(lut.runs, 100);
  EXPECT_EQ(lut.seed, 9u);
}

TEST(RefCal, AveragingFollowsRootRuns) {
  AdcConfig c = quiet(8, binary_bit_weights(8));
  c.comp_noise_sigma = 0.5 * c.lsb();
  const AdcInstance adc = build_instance(c, {}, 1);
  const std::size_t n = 1 << 13;
  const Signal s = stim(c, n);
  const int runs = 50;

  // Single-run spread per transition, pooled.
  std::vector<std::vector<double>> per_run;
  for (int r = 0; r < runs; ++r) per_run.push_back(measure_positions(adc, s, n, run_seed(77, r)));
  double var1 = 0;
  std::size_t count = 0;
  for (std::size_t k = 1; k + 1 < per_run[0].size(); ++k) {
    double m = 0, m2 = 0;
    for (const auto& p : per_run) m += p[k];
    m /= runs;
    for (const auto& p : per_run) m2 += (p[k] - m) * (p[k] - m);
    var1 += m2 / (runs - 1);
    ++count;
  }
  const double sigma1 = std::sqrt(var1 / count);

  const Lut a = build_lut(adc, s, {runs, n}, 1);
  const Lut b = build_lut(adc, s, {runs, n}, 2);
  // Interior entries average two adjacent transitions, so compare their
  // difference against the pooled single-transition spread.
  std::vector<double> pa, pb;
  for (std::size_t k = 2; k + 2 < a.map.size(); ++k) {
    pa.push_back(a.map[k]);
    pb.push_back(b.map[k]);
  }
  const double diff = rms(pa, pb) / std::sqrt(2.0);
  const double expected_lo = sigma1 / std::sqrt(2.0 * runs);  // fully correlated neighbours excluded
  const double expected_hi = sigma1 / std::sqrt(1.0 * runs);
  EXPECT_GT(sigma1, 0.05);
  EXPECT_GT(diff, 0.7 * expected_lo);
  EXPECT_LT(diff, 1.3 * expected_hi);
}

TEST(RefCal, RunSeedsAreDistinct) {
  EXPECT_NE(run_seed(1, 0), run_seed(1, 1));
  EXPECT_NE(run_seed(1, 0), run_seed(2, 0));
  EXPECT_EQ(run_seed(5, 3), run_seed(5, 3));
}

TEST(RefCal, LutFromPositions) {
  std::vector<double> pos(15);
  for (int k = 0; k < 15; ++k) pos[k] = k + 0.5;
  pos[7] = 7.6;
  const Lut l = lut_from_positions(pos, 4);
  EXPECT_DOUBLE_EQ(l(0), 0.0);
  EXPECT_DOUBLE_EQ(l(15), 15.0);
  EXPECT_DOUBLE_EQ(l(7), std::round(0.5 * (6.5 + 7.6) * 256) / 256);
  EXPECT_DOUBLE_EQ(l(8), std::round(0.5 * (7.6 + 8.5) * 256) / 256);
  for (double v : l.map) EXPECT_DOUBLE_EQ(v * 256, std::round(v * 256));
  EXPECT_THROW(lut_from_positions(std::vector<double>(14, 0.0), 4), UsageError);
}

TEST(RefCal, IdentityAndRangeChecks) {
  const Lut id = Lut::identity(12);
  for (int k : {0, 1, 2048, 4095}) EXPECT_EQ(apply_lut(id, k), k);
  EXPECT_THROW(id(-1), UsageError);
  EXPECT_THROW(id(4096), UsageError);
  const std::vector<int> codes{3, 4000};
  EXPECT_EQ(apply_lut(id, std::span<const int>(codes)), (std::vector<double>{3.0, 4000.0}));
  Lut bad = id;
  bad.map[10] = 5.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RefCal, MismatchedLutIsMonotone) {
  AdcConfig c = quiet(10, binary_bit_weights(10));
  c.cap_mismatch_sigma = 0.02;
  c.comp_noise_sigma = 50e-6;
  const AdcInstance adc = build_instance(c, {}, 3);
  const Lut lut = build_lut(adc, stim(c, 1 << 16), {4, 1 << 16}, 1);
  EXPECT_NO_THROW(lut.validate());
  EXPECT_THROW(build_lut(adc, stim(c, 1 << 16), {0, 1 << 16}, 1), UsageError);
}

#pragma once

// Charge-level behavioral model of a redundant SAR ADC with a bidirectional
// capacitive DAC, comparator offset/noise, kT/C sampling noise and a
// resistive reference network whose droop recovers exponentially.
//
// Conventions
//   * Differential input in [-v_ref, +v_ref]; code 0 at -FS, 2^(N-1) at 0.
//   * Ideal transition into code k sits at -v_ref + (k - 0.5) * LSB.
//   * The DAC starts at the middle of its reachable range and moves by half
//     a cycle weight up or down after every decision. With weights w_i and
//     remaining sum R_i = sum_{j>=i} w_j, cycle i compares against
//         theta_i = sum_{j<i} d_j c_j + (sum_{j>=i} c_j) / 2   [unit caps]
//     which gives symmetric redundancy of +/-(R_i - 2 w_i)/2 codes. The
//     output code is the plain weighted sum of decisions, clamped.
//   * Only upward DAC moves pull charge from the reference (single-sided
//     switching, reset referenced to common mode).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sarcal/error.hpp"
#include "sarcal/signal_gen.hpp"

namespace sarcal {

inline constexpr double kBoltzmann = 1.380649e-23;

/// 12-bit weights with one repeated mid weight (13 cycles, +/-31.5 LSB of
/// MSB decision-error tolerance).
inline std::vector<int> default_bit_weights() {
  return {2048, 1024, 512, 256, 128, 64, 64, 32, 16, 8, 4, 2, 1};
}

inline std::vector<int> binary_bit_weights(int bits) {
  std::vector<int> w;
  for (int i = bits - 1; i >= 0; --i) w.push_back(1 << i);
  return w;
}

struct AdcConfig {
  int resolution_bits = 12;
  std::vector<int> bit_weights = default_bit_weights();
  double v_ref = 0.5;             // V, differential full scale is +/- v_ref
  double unit_cap = 0.6e-15;      // F
  double samp_cap = 2.5e-12;      // F
  double cap_mismatch_sigma = 0;  // relative sigma of one unit cap
  double comp_offset_sigma = 0;   // V
  double comp_noise_sigma = 0;    // V rms per decision
  double fs = 84e6;               // Hz
  double bit_cycle_time = 0.7e-9; // s
  double temperature = 300.0;     // K, 0 disables kT/C noise
  double gain = 1.0;              // sampling-path gain
  double timing_skew = 0.0;       // s, added to every sampling instant

  std::int64_t num_codes() const { return std::int64_t{1} << resolution_bits; }
  int max_code() const { return static_cast<int>(num_codes() - 1); }
  double lsb() const { return 2.0 * v_ref / static_cast<double>(num_codes()); }
  double ktc_sigma() const { return std::sqrt(kBoltzmann * temperature / samp_cap); }

  void validate() const {
    if (resolution_bits < 1 || resolution_bits > 24)
      throw ConfigError("resolution_bits", "must be in [1, 24]");
    if (bit_weights.empty()) throw ConfigError("bit_weights", "must not be empty");
    std::int64_t sum = 0;
    for (int w : bit_weights) {
      if (w <= 0) throw ConfigError("bit_weights", "every weight must be > 0");
      sum += w;
    }
    if (sum < num_codes() - 1)
      throw ConfigError("bit_weights", "weights must sum to at least 2^N - 1");
    // Each cycle must be able to reach every code below the next weight.
    std::int64_t rest = 0;
    for (auto it = bit_weights.rbegin(); it != bit_weights.rend(); ++it) {
      if (*it > rest + 1)
        throw ConfigError("bit_weights", "weight " + std::to_string(*it) +
                                             " exceeds the sum of later weights + 1");
      rest += *it;
    }
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be finite and > 0");
    };
    auto non_negative = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be finite and >= 0");
    };
    positive(v_ref, "v_ref");
    positive(unit_cap, "unit_cap");
    positive(samp_cap, "samp_cap");
    positive(fs, "fs");
    positive(bit_cycle_time, "bit_cycle_time");
    positive(gain, "gain");
    non_negative(cap_mismatch_sigma, "cap_mismatch_sigma");
    non_negative(comp_offset_sigma, "comp_offset_sigma");
    non_negative(comp_noise_sigma, "comp_noise_sigma");
    non_negative(temperature, "temperature");
    if (!std::isfinite(timing_skew)) throw ConfigError("timing_skew", "must be finite");
    if (static_cast<double>(bit_weights.size()) * bit_cycle_time > 1.0 / fs * (1.0 + 1e-12))
      throw ConfigError("bit_cycle_time", "conversion does not fit in one sample period");
  }
};

/// Reference network: ideal source behind series_resistance, loaded by
/// parasitic_cap + decap. series_resistance == 0 models an ideal reference.
struct RefNetworkConfig {
  double series_resistance = 0.0;  // ohm
  double parasitic_cap = 0.0;      // F
  double decap = 0.0;              // F

  double node_cap() const { return parasitic_cap + decap; }
  double tau() const { return series_resistance * node_cap(); }
  bool enabled() const { return series_resistance > 0.0; }

  void validate() const {
    auto non_negative = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be finite and >= 0");
    };
    non_negative(series_resistance, "series_resistance");
    non_negative(parasitic_cap, "parasitic_cap");
    non_negative(decap, "decap");
    if (enabled() && !(node_cap() > 0.0))
      throw ConfigError("parasitic_cap", "reference node needs capacitance when series_resistance > 0");
    if (!std::isfinite(tau())) throw ConfigError("series_resistance", "time constant not finite");
  }
};

struct ConversionResult {
  int code = 0;
  std::vector<std::uint8_t> bit_decisions;
  std::vector<double> ref_trace;  // reference deviation at each comparison, volts
  double switching_charge = 0.0;  // coulombs drawn from the reference
};

/// Timestamped codes from one converter.
struct CodeStream {
  std::vector<int> codes;
  std::vector<double> times;
  double fs = 0.0;
  int resolution_bits = 12;

  std::size_t size() const { return codes.size(); }
};

class AdcInstance {
 public:
  AdcInstance(AdcConfig config, RefNetworkConfig refnet, std::uint64_t seed)
      : config_(std::move(config)), refnet_(refnet), rng_(seed) {
    config_.validate();
    refnet_.validate();
    cap_values_.reserve(config_.bit_weights.size());
    for (int w : config_.bit_weights) {
      const double nominal = w * config_.unit_cap;
      double rel = 0.0;
      if (config_.cap_mismatch_sigma > 0.0)
        rel = config_.cap_mismatch_sigma * gauss() / std::sqrt(static_cast<double>(w));
      const double c = nominal * (1.0 + rel);
      if (!(c > 0.0))
        throw ConfigError("cap_mismatch_sigma", "drawn capacitance is not positive");
      cap_values_.push_back(c);
    }
    if (config_.comp_offset_sigma > 0.0) comp_offset_ = config_.comp_offset_sigma * gauss();
    unit_caps_.resize(cap_values_.size());
    for (std::size_t i = 0; i < cap_values_.size(); ++i)
      unit_caps_[i] = cap_values_[i] / config_.unit_cap;
  }

  const AdcConfig& config() const { return config_; }
  const RefNetworkConfig& ref_network() const { return refnet_; }
  const std::vector<double>& cap_values() const { return cap_values_; }
  double comp_offset() const { return comp_offset_; }

  /// Reference deviation from nominal at time t (no state change).
  double ref_deviation(double t) const {
    if (!refnet_.enabled() || ref_dev_ == 0.0) return 0.0;
    return ref_dev_ * std::exp(-(t - ref_time_) / refnet_.tau());
  }
  double ref_state() const { return ref_dev_; }
  double ref_state_time() const { return ref_time_; }

  /// Override realized capacitances (units of farads). Used to construct
  /// deterministic mismatch patterns.
  void set_cap_values(std::vector<double> caps) {
    if (caps.size() != cap_values_.size())
      throw UsageError("set_cap_values: length must match bit_weights");
    for (double c : caps)
      if (!(c > 0.0)) throw UsageError("set_cap_values: capacitances must be > 0");
    cap_values_ = std::move(caps);
    for (std::size_t i = 0; i < cap_values_.size(); ++i)
      unit_caps_[i] = cap_values_[i] / config_.unit_cap;
  }

  /// Restart the noise generator; realized mismatch is kept.
  void reseed_noise(std::uint64_t seed) {
    rng_.seed(seed);
    normal_.reset();
  }

  /// Rebase the clock so a fresh capture can start again at t = 0. The
  /// reference deviation is carried over as-is.
  void restart_clock() {
    ref_time_ = 0.0;
    last_sample_time_ = -std::numeric_limits<double>::infinity();
  }

  ConversionResult sample_and_convert(double v_in, double t, bool trace = false) {
    ConversionResult r;
    r.code = convert(v_in, t, &r, trace);
    return r;
  }

  /// Same as sample_and_convert but returns only the code.
  int convert(double v_in, double t) { return convert(v_in, t, nullptr, false); }

 private:
  double gauss() { return normal_(rng_); }

  int convert(double v_in, double t, ConversionResult* out, bool trace) {
    if (t < last_sample_time_)
      throw UsageError("sample_and_convert: sampling time went backwards");
    last_sample_time_ = t;

    const AdcConfig& c = config_;
    double v_s = v_in;
    if (c.temperature > 0.0) v_s += c.ktc_sigma() * gauss();
    v_s += comp_offset_;

    const std::size_t n = unit_caps_.size();
    const double scale = 2.0 / static_cast<double>(c.num_codes());
    double remaining = 0.0;
    for (double u : unit_caps_) remaining += u;
    double acc = 0.0;
    std::int64_t code = 0;
    double charge = 0.0;
    const bool ripple = refnet_.enabled();
    const double tau = ripple ? refnet_.tau() : 1.0;
    const double node_cap = refnet_.node_cap();

    if (out) {
      out->bit_decisions.assign(n, 0);
      if (trace) out->ref_trace.assign(n, 0.0);
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double t_i = t + static_cast<double>(i + 1) * c.bit_cycle_time;
      double dev = 0.0;
      if (ripple && ref_dev_ != 0.0) {
        dev = ref_dev_ * std::exp(-(t_i - ref_time_) / tau);
        ref_dev_ = dev;
        ref_time_ = t_i;
      }
      const double theta = acc + 0.5 * remaining;
      const double level = (c.v_ref + dev) * (scale * theta - 1.0);
      double v_cmp = v_s;
      if (c.comp_noise_sigma > 0.0) v_cmp += c.comp_noise_sigma * gauss();
      const bool up = v_cmp >= level;
      if (out) {
        out->bit_decisions[i] = up ? 1 : 0;
        if (trace) out->ref_trace[i] = dev;
      }
      if (up) {
        acc += unit_caps_[i];
        code += c.bit_weights[i];
      }
      remaining -= unit_caps_[i];

      // DAC moves by half this cycle's capacitance; only an upward move
      // connects capacitance to the reference.
      if (up && i + 1 < n) {
        const double moved = 0.5 * cap_values_[i];
        const double v_before = c.v_ref + dev;
        if (ripple) {
          const double v_after = v_before * node_cap / (node_cap + moved);
          ref_dev_ = v_after - c.v_ref;
          ref_time_ = t_i;
          charge += moved * v_after;
        } else {
          charge += moved * v_before;
        }
      }
    }
    if (out) out->switching_charge = charge;
    return static_cast<int>(std::clamp<std::int64_t>(code, 0, c.max_code()));
  }

  AdcConfig config_;
  RefNetworkConfig refnet_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<double> cap_values_;
  std::vector<double> unit_caps_;
  double comp_offset_ = 0.0;
  double ref_dev_ = 0.0;
  double ref_time_ = 0.0;
  double last_sample_time_ = -std::numeric_limits<double>::infinity();
};

inline AdcInstance build_instance(const AdcConfig& config, const RefNetworkConfig& refnet,
                                  std::uint64_t seed) {
  return AdcInstance(config, refnet, seed);
}

/// n conversions at t_k = start_time + k/fs + timing_skew of the signal
/// scaled by the instance gain. Reference-network state carries over.
inline CodeStream convert_stream(AdcInstance& adc, const Signal& signal, std::size_t n,
                                 double start_time = 0.0) {
  if (n == 0) throw UsageError("convert_stream: n must be >= 1");
  const AdcConfig& c = adc.config();
  CodeStream s;
  s.fs = c.fs;
  s.resolution_bits = c.resolution_bits;
  s.codes.resize(n);
  s.times.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = start_time + static_cast<double>(k) / c.fs;
    s.times[k] = t;
    s.codes[k] = adc.convert(c.gain * signal(t + c.timing_skew), t + c.timing_skew);
  }
  return s;
}

}  // namespace sarcal

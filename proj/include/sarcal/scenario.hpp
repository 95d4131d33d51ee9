#pragma once

// Scenario configuration: JSON (comments allowed) with a schema_version. A
// top-level "base" names another scenario file (relative to this one) whose
// contents are merge-patched by the remaining fields. Unknown fields are
// rejected so a typo never silently falls back to a default.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sarcal/adc_model.hpp"
#include "sarcal/ann_calib.hpp"
#include "sarcal/error.hpp"
#include "sarcal/feature_extract.hpp"
#include "sarcal/io.hpp"
#include "sarcal/ref_cal.hpp"
#include "sarcal/signal_gen.hpp"

namespace sarcal {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kRefRatio = 8;

/// Reference converter: a copy of the main converter at fs / 8 with its own
/// draws, gain and skew, and its own reference network.
struct ReferenceAdcConfig {
  double gain = 1.001;
  double timing_skew = 2e-12;
  double cap_mismatch_sigma = 0.05;
  double comp_offset_sigma = 0.0;
  double comp_noise_sigma = 50e-6;
  RefNetworkConfig ref_network;
  bool use_lut = true;
};

struct SignalConfig {
  Signal signal = single_tone(0.475, 1.7e6, 0.3);
  bool coherent = true;  // snap every tone onto an odd bin of the n_fft record
};

struct CaptureConfig {
  std::int64_t n_fft = 65536;
  std::size_t training_examples = 65536;
  std::size_t phase = 0;
};

struct LinearityConfig {
  bool enabled = true;
  double frequency = 1.03e6;
  double overdrive = 0.0;
  std::size_t samples = std::size_t{1} << 18;
};

struct LutConfig {
  int runs = 100;
  std::size_t samples_per_run = std::size_t{1} << 18;
  double frequency = 100e3;
  double overdrive = 0.02;
  double check_amplitude = 0.475;
  double check_frequency = 1.0e6;
};

struct ModelConfig {
  int hidden = 40;
  double output_init_scale = 0.01;
};

struct SweepConfig {
  std::vector<int> hidden = {5, 40, 80};
  std::vector<int> inputs = {41};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool parallel = true;
};

inline AdcConfig default_main_adc() {
  AdcConfig c;
  c.comp_noise_sigma = 50e-6;
  return c;
}

struct Scenario {
  std::string name = "default";
  AdcConfig main_adc = default_main_adc();
  RefNetworkConfig main_ref_network = {1500.0, 20e-12, 0.0};
  ReferenceAdcConfig reference_adc;
  SignalConfig signal;
  CaptureConfig capture;
  LinearityConfig linearity;
  LutConfig lut;
  FeatureSpec features;
  ModelConfig model;
  TrainConfig training;
  int quantization_bits = 12;
  double power_w = 1.2e-3;
  SweepConfig sweep;

  AdcConfig reference_config() const {
    AdcConfig c = main_adc;
    c.fs = main_adc.fs / kRefRatio;
    c.bit_cycle_time = main_adc.bit_cycle_time * kRefRatio;
    c.gain = reference_adc.gain;
    c.timing_skew = reference_adc.timing_skew;
    c.cap_mismatch_sigma = reference_adc.cap_mismatch_sigma;
    c.comp_offset_sigma = reference_adc.comp_offset_sigma;
    c.comp_noise_sigma = reference_adc.comp_noise_sigma;
    return c;
  }

  /// Signal with tones moved onto coherent bins when requested.
  Signal resolved_signal() const {
    Signal s = signal.signal;
    if (signal.coherent)
      for (double& f : s.frequencies) f = coherent_bin(main_adc.fs, capture.n_fft, f).f_actual;
    return s;
  }

  void validate() const {
    main_adc.validate();
    main_ref_network.validate();
    reference_config().validate();
    reference_adc.ref_network.validate();
    signal.signal.validate();
    if (signal.signal.kind == SignalKind::dc)
      throw ConfigError("signal.kind", "evaluation needs a tone");
    for (double f : signal.signal.frequencies)
      if (!(f < main_adc.fs / 2)) throw ConfigError("signal.frequencies", "must be below fs/2");
    if (capture.n_fft < 8 || (capture.n_fft & (capture.n_fft - 1)) != 0)
      throw ConfigError("capture.n_fft", "must be a power of two >= 8");
    if (capture.training_examples < 2)
      throw ConfigError("capture.training_examples", "must be >= 2");
    if (capture.phase >= static_cast<std::size_t>(kRefRatio))
      throw ConfigError("capture.phase", "must be < 8");
    if (linearity.enabled) {
      if (linearity.samples < 1024 || (linearity.samples & (linearity.samples - 1)) != 0)
        throw ConfigError("linearity.samples", "must be a power of two >= 1024");
      if (!(linearity.frequency > 0 && linearity.frequency < main_adc.fs / 2))
        throw ConfigError("linearity.frequency", "must lie in (0, fs/2)");
      if (!(linearity.overdrive >= 0)) throw ConfigError("linearity.overdrive", "must be >= 0");
    }
    if (lut.runs < 1) throw ConfigError("lut.runs", "must be >= 1");
    if (lut.samples_per_run < 1024 || (lut.samples_per_run & (lut.samples_per_run - 1)) != 0)
      throw ConfigError("lut.samples_per_run", "must be a power of two >= 1024");
    if (!(lut.overdrive > 0)) throw ConfigError("lut.overdrive", "must be > 0");
    features.validate();
    if (features.resolution_bits != main_adc.resolution_bits)
      throw ConfigError("features.resolution_bits", "must equal main_adc.resolution_bits");
    if (model.hidden < 1) throw ConfigError("model.hidden", "must be >= 1");
    if (!(model.output_init_scale >= 0))
      throw ConfigError("model.output_init_scale", "must be >= 0");
    training.validate();
    if (quantization_bits < 4 || quantization_bits > 16)
      throw ConfigError("quantization.bits", "must be in [4, 16]");
    if (!(power_w > 0)) throw ConfigError("power_w", "must be > 0");
    if (sweep.hidden.empty() || sweep.inputs.empty() || sweep.seeds.empty())
      throw ConfigError("sweep", "lists must be non-empty");
    for (int h : sweep.hidden)
      if (h < 1) throw ConfigError("sweep.hidden", "entries must be >= 1");
    for (int m : sweep.inputs)
      if (m < 2) throw ConfigError("sweep.inputs", "entries must be >= 2");
  }
};

namespace detail {

/// Walks one JSON object, recording which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), std::string("wrong type: ") + e.what());
    }
  }

  const json* child(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void done() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(field(k.c_str()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_ref_network(const json& j, const std::string& path, RefNetworkConfig& r) {
  ObjectReader o(j, path);
  o.get("series_resistance", r.series_resistance);
  o.get("parasitic_cap", r.parasitic_cap);
  o.get("decap", r.decap);
  o.done();
}

inline void read_adc(const json& j, AdcConfig& c) {
  ObjectReader o(j, "main_adc");
  o.get("resolution_bits", c.resolution_bits);
  o.get("bit_weights", c.bit_weights);
  o.get("v_ref", c.v_ref);
  o.get("unit_cap", c.unit_cap);
  o.get("samp_cap", c.samp_cap);
  o.get("cap_mismatch_sigma", c.cap_mismatch_sigma);
  o.get("comp_offset_sigma", c.comp_offset_sigma);
  o.get("comp_noise_sigma", c.comp_noise_sigma);
  o.get("fs", c.fs);
  o.get("bit_cycle_time", c.bit_cycle_time);
  o.get("temperature", c.temperature);
  o.get("gain", c.gain);
  o.get("timing_skew", c.timing_skew);
  o.done();
}

inline void read_signal(const json& j, SignalConfig& s) {
  ObjectReader o(j, "signal");
  std::string kind = to_string(s.signal.kind);
  o.get("kind", kind);
  s.signal.kind = signal_kind_from_string(kind);
  o.get("amplitudes", s.signal.amplitudes);
  o.get("frequencies", s.signal.frequencies);
  o.get("phases", s.signal.phases);
  o.get("dc_offset", s.signal.dc_offset);
  o.get("coherent", s.coherent);
  o.done();
  if (s.signal.phases.empty()) s.signal.phases.assign(s.signal.amplitudes.size(), 0.0);
}

inline void read_training(const json& j, TrainConfig& t) {
  ObjectReader o(j, "training");
  o.get("learning_rate", t.learning_rate);
  o.get("final_learning_rate", t.final_learning_rate);
  o.get("beta1", t.beta1);
  o.get("beta2", t.beta2);
  o.get("epsilon", t.epsilon);
  o.get("batch_size", t.batch_size);
  o.get("max_samples", t.max_samples);
  o.get("validation_fraction", t.validation_fraction);
  o.get("eval_every", t.eval_every);
  o.get("whiten", t.whiten);
  o.get("whiten_floor", t.whiten_floor);
  o.done();
}

}  // namespace detail

/// Builds a Scenario from an already merged document.
inline Scenario scenario_from_json(const json& j) {
  Scenario s;
  detail::ObjectReader o(j, "");
  int version = 0;
  o.get("schema_version", version);
  if (version != kScenarioSchemaVersion)
    throw ConfigError("schema_version", "expected " + std::to_string(kScenarioSchemaVersion) +
                                            ", got " + std::to_string(version));
  o.get("name", s.name);
  if (auto c = o.child("main_adc")) detail::read_adc(*c, s.main_adc);
  if (auto c = o.child("main_ref_network"))
    detail::read_ref_network(*c, "main_ref_network", s.main_ref_network);
  if (auto c = o.child("reference_adc")) {
    detail::ObjectReader r(*c, "reference_adc");
    auto& ra = s.reference_adc;
    int ratio = kRefRatio;
    r.get("ratio", ratio);
    if (ratio != kRefRatio) throw ConfigError("reference_adc.ratio", "must be 8");
    r.get("gain", ra.gain);
    r.get("timing_skew", ra.timing_skew);
    r.get("cap_mismatch_sigma", ra.cap_mismatch_sigma);
    r.get("comp_offset_sigma", ra.comp_offset_sigma);
    r.get("comp_noise_sigma", ra.comp_noise_sigma);
    r.get("use_lut", ra.use_lut);
    if (auto n = r.child("ref_network"))
      detail::read_ref_network(*n, "reference_adc.ref_network", ra.ref_network);
    r.done();
  }
  if (auto c = o.child("signal")) detail::read_signal(*c, s.signal);
  if (auto c = o.child("capture")) {
    detail::ObjectReader r(*c, "capture");
    r.get("n_fft", s.capture.n_fft);
    r.get("training_examples", s.capture.training_examples);
    r.get("phase", s.capture.phase);
    r.done();
  }
  if (auto c = o.child("linearity")) {
    detail::ObjectReader r(*c, "linearity");
    r.get("enabled", s.linearity.enabled);
    r.get("frequency", s.linearity.frequency);
    r.get("overdrive", s.linearity.overdrive);
    r.get("samples", s.linearity.samples);
    r.done();
  }
  if (auto c = o.child("lut")) {
    detail::ObjectReader r(*c, "lut");
    r.get("runs", s.lut.runs);
    r.get("samples_per_run", s.lut.samples_per_run);
    r.get("frequency", s.lut.frequency);
    r.get("overdrive", s.lut.overdrive);
    r.get("check_amplitude", s.lut.check_amplitude);
    r.get("check_frequency", s.lut.check_frequency);
    r.done();
  }
  if (auto c = o.child("features")) {
    detail::ObjectReader r(*c, "features");
    r.get("m", s.features.m);
    r.get("include_derivative", s.features.include_derivative);
    r.get("resolution_bits", s.features.resolution_bits);
    r.done();
  }
  if (auto c = o.child("model")) {
    detail::ObjectReader r(*c, "model");
    r.get("hidden", s.model.hidden);
    r.get("output_init_scale", s.model.output_init_scale);
    r.done();
  }
  if (auto c = o.child("training")) detail::read_training(*c, s.training);
  if (auto c = o.child("quantization")) {
    detail::ObjectReader r(*c, "quantization");
    r.get("bits", s.quantization_bits);
    r.done();
  }
  o.get("power_w", s.power_w);
  if (auto c = o.child("sweep")) {
    detail::ObjectReader r(*c, "sweep");
    r.get("hidden", s.sweep.hidden);
    r.get("inputs", s.sweep.inputs);
    r.get("seeds", s.sweep.seeds);
    r.get("parallel", s.sweep.parallel);
    r.done();
  }
  o.done();
  s.validate();
  return s;
}

/// Reads a scenario file, resolving "base" chains.
inline json load_scenario_json(const std::filesystem::path& file, int depth = 0) {
  if (depth > 8) throw ConfigError("base", "inheritance chain too deep");
  json j;
  try {
    j = read_json(file, true);
  } catch (const IoError& e) {
    throw ConfigError("config", e.what());
  }
  if (!j.is_object()) throw ConfigError("config", file.string() + " is not a JSON object");
  if (const auto it = j.find("base"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("base", "must be a file name");
    const auto base_path = file.parent_path() / it->get<std::string>();
    json base = load_scenario_json(base_path, depth + 1);
    j.erase("base");
    base.merge_patch(j);
    return base;
  }
  return j;
}

/// The merged document is returned through `merged` when non-null.
inline Scenario load_scenario(const std::filesystem::path& file, json* merged = nullptr) {
  const json j = load_scenario_json(file);
  if (merged) *merged = j;
  return scenario_from_json(j);
}

}  // namespace sarcal

#pragma once

// Experiment orchestration shared by the command-line tool and the tests:
// dual-converter capture, reference LUT calibration, model training,
// evaluation reports and parameter sweeps.
//
// Capture layout (main-rate sample indices):
//   [0, train_end)              training region, exactly training_examples
//                               aligned rows with full feature history
//   [eval_start, eval_end)      held-out evaluation window (n_fft samples);
//                               eval_start = train_end, so the window shares
//                               only feature history with training
// The reference converter samples the same time axis at every 8th main
// instant starting at main index `phase`.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sarcal/adc_model.hpp"
#include "sarcal/ann_calib.hpp"
#include "sarcal/feature_extract.hpp"
#include "sarcal/io.hpp"
#include "sarcal/metrics.hpp"
#include "sarcal/ref_cal.hpp"
#include "sarcal/scenario.hpp"
#include "sarcal/signal_gen.hpp"

namespace sarcal {

/// Sub-seed slots derived from the command seed.
enum class SeedSlot : int {
  main_adc = 0,
  reference_adc = 1,
  lut = 2,
  model_init = 3,
  training = 4,
  linearity_main_noise = 5,
  linearity_ref_noise = 6,
  lut_check = 7,
};

inline std::uint64_t sub_seed(std::uint64_t seed, SeedSlot slot) {
  return run_seed(seed, static_cast<int>(slot));
}

struct CaptureLayout {
  std::size_t phase = 0;
  std::size_t train_end = 0;
  std::size_t eval_start = 0;
  std::size_t eval_len = 0;
  std::size_t history = 0;

  std::size_t main_samples() const { return eval_start + eval_len; }
  std::size_t ref_samples() const { return (main_samples() - phase + kRefRatio - 1) / kRefRatio; }
};

inline CaptureLayout capture_layout(const FeatureSpec& spec, std::size_t examples,
                                    std::size_t eval_len, std::size_t phase) {
  CaptureLayout l;
  l.phase = phase;
  l.history = static_cast<std::size_t>(spec.past_samples());
  const std::size_t r = kRefRatio;
  const std::size_t first = l.history > phase ? (l.history - phase + r - 1) / r : 0;
  l.train_end = phase + r * (first + examples - 1) + 1;
  l.eval_start = l.train_end;
  l.eval_len = eval_len;
  return l;
}

struct Capture {
  CodeStream main;
  CodeStream ref;
  Signal signal;
  CaptureLayout layout;
};

inline CaptureLayout tone_layout(const Scenario& sc) {
  return capture_layout(sc.features, sc.capture.training_examples,
                        static_cast<std::size_t>(sc.capture.n_fft), sc.capture.phase);
}

inline CaptureLayout linearity_layout(const Scenario& sc) {
  return capture_layout(sc.features, sc.capture.training_examples, sc.linearity.samples,
                        sc.capture.phase);
}

inline Signal linearity_stimulus(const Scenario& sc) {
  const auto cb = coherent_bin(sc.main_adc.fs, static_cast<std::int64_t>(sc.linearity.samples),
                               sc.linearity.frequency);
  return histogram_stimulus(sc.main_adc.v_ref, cb.f_actual, sc.linearity.overdrive);
}

inline AdcInstance main_instance(const Scenario& sc, std::uint64_t seed) {
  return build_instance(sc.main_adc, sc.main_ref_network, sub_seed(seed, SeedSlot::main_adc));
}

inline AdcInstance reference_instance(const Scenario& sc, std::uint64_t seed) {
  return build_instance(sc.reference_config(), sc.reference_adc.ref_network,
                        sub_seed(seed, SeedSlot::reference_adc));
}

inline Capture run_capture(const Scenario& sc, const Signal& signal, const CaptureLayout& layout,
                           std::uint64_t seed, std::optional<SeedSlot> main_noise = {},
                           std::optional<SeedSlot> ref_noise = {}) {
  AdcInstance main = main_instance(sc, seed);
  AdcInstance ref = reference_instance(sc, seed);
  if (main_noise) main.reseed_noise(sub_seed(seed, *main_noise));
  if (ref_noise) ref.reseed_noise(sub_seed(seed, *ref_noise));
  Capture c;
  c.signal = signal;
  c.layout = layout;
  c.main = convert_stream(main, signal, layout.main_samples());
  c.ref = convert_stream(ref, signal, layout.ref_samples(),
                         static_cast<double>(layout.phase) / sc.main_adc.fs);
  return c;
}

inline Capture simulate_tone(const Scenario& sc, std::uint64_t seed) {
  return run_capture(sc, sc.resolved_signal(), tone_layout(sc), seed);
}

inline Capture simulate_linearity(const Scenario& sc, std::uint64_t seed) {
  return run_capture(sc, linearity_stimulus(sc), linearity_layout(sc), seed,
                     SeedSlot::linearity_main_noise, SeedSlot::linearity_ref_noise);
}

// ------------------------------------------------------------ reference LUT

struct ReferenceCalibration {
  Lut lut;
  SpectrumReport raw;
  SpectrumReport corrected;
};

inline Signal lut_stimulus(const Scenario& sc) {
  const double fs_ref = sc.main_adc.fs / kRefRatio;
  const auto cb = coherent_bin(fs_ref, static_cast<std::int64_t>(sc.lut.samples_per_run),
                               sc.lut.frequency);
  return histogram_stimulus(sc.main_adc.v_ref, cb.f_actual, sc.lut.overdrive);
}

/// Builds the LUT, then checks it on a fresh coherent tone at the reference
/// rate.
inline ReferenceCalibration calibrate_reference(const Scenario& sc, std::uint64_t seed) {
  const AdcInstance ref = reference_instance(sc, seed);
  LutOptions opt;
  opt.runs = sc.lut.runs;
  opt.samples_per_run = sc.lut.samples_per_run;
  ReferenceCalibration out;
  out.lut = build_lut(ref, lut_stimulus(sc), opt, sub_seed(seed, SeedSlot::lut));

  const double fs_ref = sc.main_adc.fs / kRefRatio;
  const std::int64_t n = sc.capture.n_fft;
  const auto cb = coherent_bin(fs_ref, n, sc.lut.check_frequency);
  AdcInstance check = ref;
  check.reseed_noise(sub_seed(seed, SeedSlot::lut_check));
  const auto s = convert_stream(check, single_tone(sc.lut.check_amplitude, cb.f_actual, 0.3),
                                static_cast<std::size_t>(n));
  out.raw = spectrum(std::span<const int>(s.codes), n, cb.bin);
  const auto fixed = apply_lut(out.lut, s.codes);
  out.corrected = spectrum(std::span<const double>(fixed), n, cb.bin);
  return out;
}

inline json reference_check_json(const ReferenceCalibration& rc) {
  return {{"check",
           {{"raw_sndr_db", rc.raw.sndr_db},
            {"raw_sfdr_db", rc.raw.sfdr_db},
            {"lut_sndr_db", rc.corrected.sndr_db},
            {"lut_sfdr_db", rc.corrected.sfdr_db}}}};
}

// ----------------------------------------------------------------- training

inline std::vector<double> reference_values(const Scenario& sc, const CodeStream& ref,
                                            const Lut* lut) {
  if (sc.reference_adc.use_lut) {
    if (!lut) throw UsageError("reference LUT required (reference_adc.use_lut is set)");
    return apply_lut(*lut, ref.codes);
  }
  return std::vector<double>(ref.codes.begin(), ref.codes.end());
}

inline TrainingSet training_set_for(const Scenario& sc, const Capture& cap, const Lut* lut) {
  CodeStream head = cap.main;
  head.codes.resize(cap.layout.train_end);
  head.times.resize(cap.layout.train_end);
  const auto ref = reference_values(sc, cap.ref, lut);
  auto set = build_training_set(head, ref, sc.features, kRefRatio, cap.layout.phase);
  if (set.rows() != sc.capture.training_examples)
    throw UsageError("training set has " + std::to_string(set.rows()) + " rows, expected " +
                     std::to_string(sc.capture.training_examples));
  return set;
}

inline TrainResult train_on_capture(const Scenario& sc, const Capture& cap, const Lut* lut,
                                    std::uint64_t seed) {
  const auto set = training_set_for(sc, cap, lut);
  AnnModel init = init_model(sc.model.hidden, sc.features.m, sub_seed(seed, SeedSlot::model_init),
                             sc.model.output_init_scale);
  TrainConfig cfg = sc.training;
  cfg.seed = sub_seed(seed, SeedSlot::training);
  return train(std::move(init), set, cfg);
}

// --------------------------------------------------------------- evaluation

struct DynamicMetrics {
  double sndr_db = 0, sfdr_db = 0, thd_db = 0, enob_bits = 0, fom_j_per_step = 0;
  std::int64_t signal_bin = 0, spur_bin = 0;
  bool signal_bin_suspect = false;
};

struct IntermodMetrics {
  double im2_db = 0, im3_db = 0;
};

struct StaticMetrics {
  double max_abs_dnl = 0, inl_extreme = 0, max_abs_inl = 0;
  std::size_t missing_codes = 0;
};

struct MetricSet {
  std::optional<DynamicMetrics> dynamic;
  std::optional<IntermodMetrics> intermod;
  std::optional<StaticMetrics> linearity;
};

inline constexpr int kReportSchemaVersion = 1;

struct Report {
  std::string scenario;
  std::uint64_t seed = 0;
  double fs = 0;
  std::int64_t n_fft = 0;
  std::string signal_kind;
  std::vector<double> frequencies;
  std::vector<double> amplitudes;
  MetricSet uncalibrated;
  std::optional<MetricSet> calibrated;
  std::optional<MetricSet> calibrated_fixed_point;
  int model_h = 0, model_m = 0;
  std::size_t model_weights = 0, model_parameters = 0;
  int quantization_bits = 0;
};

/// Evaluation-window data plus the spectra behind the report numbers.
struct Evaluation {
  Report report;
  std::optional<SpectrumReport> spectrum_uncal, spectrum_cal;
  std::optional<LinearityReport> linearity_uncal, linearity_cal;
};

inline std::int64_t tone_bin(double f, double fs, std::int64_t n_fft) {
  return static_cast<std::int64_t>(std::llround(f * static_cast<double>(n_fft) / fs));
}

inline std::vector<double> corrected_window(const CodeStream& main, const CaptureLayout& l,
                                            const FeatureSpec& spec, const AnnModel* model,
                                            const QuantizedModel* q) {
  const auto begin = main.codes.begin() + static_cast<std::ptrdiff_t>(l.eval_start - l.history);
  const auto end = main.codes.begin() + static_cast<std::ptrdiff_t>(l.eval_start + l.eval_len);
  const std::vector<int> codes(begin, end);
  const CorrectedStream cs = q ? correct_stream_q(*q, codes, spec) : correct_stream(*model, codes, spec);
  return std::vector<double>(cs.values.begin() + static_cast<std::ptrdiff_t>(l.history),
                             cs.values.end());
}

inline std::vector<double> raw_window(const CodeStream& main, const CaptureLayout& l) {
  const auto begin = main.codes.begin() + static_cast<std::ptrdiff_t>(l.eval_start);
  return std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(l.eval_len));
}

inline DynamicMetrics dynamic_metrics(const SpectrumReport& r, double power_w, double fs) {
  DynamicMetrics d;
  d.sndr_db = r.sndr_db;
  d.sfdr_db = r.sfdr_db;
  d.thd_db = r.thd_db;
  d.enob_bits = r.enob_bits;
  d.fom_j_per_step = fom_walden(power_w, r.sndr_db, fs);
  d.signal_bin = r.signal_bin;
  d.spur_bin = r.spur_bin;
  d.signal_bin_suspect = r.signal_bin_suspect;
  return d;
}

inline StaticMetrics static_metrics(const LinearityReport& r) {
  return {r.max_abs_dnl, r.inl_extreme, r.max_abs_inl, r.missing_codes.size()};
}

/// Metrics of one evaluation window for the scenario's signal.
inline MetricSet window_metrics(const Scenario& sc, std::span<const double> x,
                                std::optional<SpectrumReport>* keep = nullptr) {
  MetricSet m;
  const Signal sig = sc.resolved_signal();
  const double fs = sc.main_adc.fs;
  const std::int64_t n = sc.capture.n_fft;
  const std::int64_t b1 = tone_bin(sig.frequencies[0], fs, n);
  if (sig.kind == SignalKind::two_tone) {
    const std::int64_t b2 = tone_bin(sig.frequencies[1], fs, n);
    const auto im = im2_im3_bins(x, n, b1, b2);
    m.intermod = IntermodMetrics{im.im2_db, im.im3_db};
    if (keep) *keep = spectrum(x, n, b1);
  } else {
    const auto r = spectrum(x, n, b1);
    m.dynamic = dynamic_metrics(r, sc.power_w, fs);
    if (keep) *keep = r;
  }
  return m;
}

/// `model` may be null (uncalibrated report only). `lin_model` corrects the
/// linearity capture when given.
inline Evaluation evaluate(const Scenario& sc, const Capture& tone, const AnnModel* model,
                           const Capture* lin, const AnnModel* lin_model, std::uint64_t seed) {
  Evaluation ev;
  Report& r = ev.report;
  const Signal sig = sc.resolved_signal();
  r.scenario = sc.name;
  r.seed = seed;
  r.fs = sc.main_adc.fs;
  r.n_fft = sc.capture.n_fft;
  r.signal_kind = to_string(sig.kind);
  r.frequencies = sig.frequencies;
  r.amplitudes = sig.amplitudes;

  const auto raw = raw_window(tone.main, tone.layout);
  r.uncalibrated = window_metrics(sc, raw, &ev.spectrum_uncal);
  if (model) {
    r.calibrated = window_metrics(
        sc, corrected_window(tone.main, tone.layout, sc.features, model, nullptr), &ev.spectrum_cal);
    const QuantizedModel q = quantize(*model, sc.quantization_bits);
    r.calibrated_fixed_point =
        window_metrics(sc, corrected_window(tone.main, tone.layout, sc.features, nullptr, &q));
    r.model_h = model->hidden();
    r.model_m = model->inputs();
    r.model_weights = model->weight_count();
    r.model_parameters = model->total_parameter_count();
    r.quantization_bits = sc.quantization_bits;
  }
  if (lin) {
    const Signal stim = linearity_stimulus(sc);
    const int bits = sc.main_adc.resolution_bits;
    const auto lraw = raw_window(lin->main, lin->layout);
    ev.linearity_uncal = dnl_inl_sine(std::span<const double>(lraw), bits, stim);
    r.uncalibrated.linearity = static_metrics(*ev.linearity_uncal);
    if (lin_model) {
      const auto lcal = corrected_window(lin->main, lin->layout, sc.features, lin_model, nullptr);
      ev.linearity_cal = dnl_inl_sine(std::span<const double>(lcal), bits, stim);
      if (!r.calibrated) r.calibrated = MetricSet{};
      r.calibrated->linearity = static_metrics(*ev.linearity_cal);
    }
  }
  return ev;
}

// ------------------------------------------------------------- report JSON

inline json metric_set_to_json(const MetricSet& m) {
  json j = json::object();
  if (m.dynamic) {
    const auto& d = *m.dynamic;
    j["dynamic"] = {{"sndr_db", d.sndr_db},       {"sfdr_db", d.sfdr_db},
                    {"thd_db", d.thd_db},         {"enob_bits", d.enob_bits},
                    {"fom_j_per_step", d.fom_j_per_step},
                    {"signal_bin", d.signal_bin}, {"spur_bin", d.spur_bin},
                    {"signal_bin_suspect", d.signal_bin_suspect}};
  }
  if (m.intermod) j["intermod"] = {{"im2_db", m.intermod->im2_db}, {"im3_db", m.intermod->im3_db}};
  if (m.linearity) {
    const auto& s = *m.linearity;
    j["linearity"] = {{"max_abs_dnl", s.max_abs_dnl},
                      {"inl_extreme", s.inl_extreme},
                      {"max_abs_inl", s.max_abs_inl},
                      {"missing_codes", s.missing_codes}};
  }
  return j;
}

inline json report_to_json(const Report& r) {
  json j = {{"schema_version", kReportSchemaVersion},
            {"scenario", r.scenario},
            {"seed", r.seed},
            {"fs", r.fs},
            {"n_fft", r.n_fft},
            {"signal", {{"kind", r.signal_kind}, {"frequencies", r.frequencies}, {"amplitudes", r.amplitudes}}},
            {"uncalibrated", metric_set_to_json(r.uncalibrated)}};
  if (r.calibrated) j["calibrated"] = metric_set_to_json(*r.calibrated);
  if (r.calibrated_fixed_point) j["calibrated_fixed_point"] = metric_set_to_json(*r.calibrated_fixed_point);
  if (r.model_h > 0)
    j["model"] = {{"h", r.model_h},
                  {"m", r.model_m},
                  {"weight_count", r.model_weights},
                  {"total_parameters", r.model_parameters},
                  {"quantization_bits", r.quantization_bits}};
  return j;
}

namespace detail {

inline MetricSet metric_set_from_json(const json& j, const std::string& path) {
  ObjectReader o(j, path);
  MetricSet m;
  if (auto c = o.child("dynamic")) {
    ObjectReader r(*c, path + ".dynamic");
    DynamicMetrics d;
    r.get("sndr_db", d.sndr_db);
    r.get("sfdr_db", d.sfdr_db);
    r.get("thd_db", d.thd_db);
    r.get("enob_bits", d.enob_bits);
    r.get("fom_j_per_step", d.fom_j_per_step);
    r.get("signal_bin", d.signal_bin);
    r.get("spur_bin", d.spur_bin);
    r.get("signal_bin_suspect", d.signal_bin_suspect);
    r.done();
    m.dynamic = d;
  }
  if (auto c = o.child("intermod")) {
    ObjectReader r(*c, path + ".intermod");
    IntermodMetrics im;
    r.get("im2_db", im.im2_db);
    r.get("im3_db", im.im3_db);
    r.done();
    m.intermod = im;
  }
  if (auto c = o.child("linearity")) {
    ObjectReader r(*c, path + ".linearity");
    StaticMetrics s;
    r.get("max_abs_dnl", s.max_abs_dnl);
    r.get("inl_extreme", s.inl_extreme);
    r.get("max_abs_inl", s.max_abs_inl);
    r.get("missing_codes", s.missing_codes);
    r.done();
    m.linearity = s;
  }
  o.done();
  return m;
}

}  // namespace detail

/// Strict reader: unknown fields and other schema versions are rejected.
inline Report report_from_json(const json& j) {
  try {
    detail::ObjectReader o(j, "report");
    int version = 0;
    o.get("schema_version", version);
    if (version != kReportSchemaVersion)
      throw IoError("report: unsupported schema_version " + std::to_string(version));
    Report r;
    o.get("scenario", r.scenario);
    o.get("seed", r.seed);
    o.get("fs", r.fs);
    o.get("n_fft", r.n_fft);
    if (auto c = o.child("signal")) {
      detail::ObjectReader s(*c, "report.signal");
      s.get("kind", r.signal_kind);
      s.get("frequencies", r.frequencies);
      s.get("amplitudes", r.amplitudes);
      s.done();
    }
    const json* u = o.child("uncalibrated");
    if (!u) throw IoError("report: missing uncalibrated metrics");
    r.uncalibrated = detail::metric_set_from_json(*u, "report.uncalibrated");
    if (auto c = o.child("calibrated"))
      r.calibrated = detail::metric_set_from_json(*c, "report.calibrated");
    if (auto c = o.child("calibrated_fixed_point"))
      r.calibrated_fixed_point = detail::metric_set_from_json(*c, "report.calibrated_fixed_point");
    if (auto c = o.child("model")) {
      detail::ObjectReader m(*c, "report.model");
      m.get("h", r.model_h);
      m.get("m", r.model_m);
      m.get("weight_count", r.model_weights);
      m.get("total_parameters", r.model_parameters);
      m.get("quantization_bits", r.quantization_bits);
      m.done();
    }
    o.done();
    return r;
  } catch (const ConfigError& e) {
    throw IoError(std::string("report: ") + e.what());
  }
}

// ------------------------------------------------------------------- sweep

struct SweepRow {
  int h = 0;
  int m = 0;
  std::uint64_t seed = 0;
  MetricSet uncalibrated;
  MetricSet calibrated;
  double train_mse = 0;
  double validation_mse = 0;
};

/// One sweep point: the same chain as simulate -> train -> evaluate.
inline SweepRow sweep_point(const Scenario& base, int h, int m, std::uint64_t seed, const Lut* lut) {
  Scenario sc = base;
  sc.model.hidden = h;
  sc.features.m = m;
  sc.validate();
  const Capture cap = simulate_tone(sc, seed);
  const TrainResult tr = train_on_capture(sc, cap, lut, seed);
  const Evaluation ev = evaluate(sc, cap, &tr.model, nullptr, nullptr, seed);
  SweepRow row;
  row.h = h;
  row.m = m;
  row.seed = seed;
  row.uncalibrated = ev.report.uncalibrated;
  row.calibrated = *ev.report.calibrated;
  row.train_mse = tr.history.back().train_mse;
  row.validation_mse = tr.history.back().validation_mse;
  return row;
}

namespace detail {

/// Runs f(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Rows sorted by (h, m, seed). `threads` = 0 picks the hardware count.
/// LUTs found in `prebuilt` are used instead of calibrating again.
inline std::vector<SweepRow> run_sweep(const Scenario& sc, unsigned threads = 0,
                                       const std::map<std::uint64_t, Lut>* prebuilt = nullptr) {
  if (threads == 0) threads = sc.sweep.parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1;
  if (sc.resolved_signal().kind != SignalKind::single_tone)
    throw ConfigError("signal.kind", "sweep needs a single tone");

  std::vector<std::uint64_t> seeds = sc.sweep.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::map<std::uint64_t, Lut> luts;
  if (sc.reference_adc.use_lut) {
    std::vector<std::uint64_t> missing;
    for (auto s : seeds) {
      if (prebuilt && prebuilt->count(s))
        luts[s] = prebuilt->at(s);
      else
        missing.push_back(s);
    }
    std::vector<Lut> built(missing.size());
    detail::parallel_for(missing.size(), threads,
                         [&](std::size_t i) { built[i] = calibrate_reference(sc, missing[i]).lut; });
    for (std::size_t i = 0; i < missing.size(); ++i) luts[missing[i]] = std::move(built[i]);
  }

  struct Job {
    int h, m;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int h : sc.sweep.hidden)
    for (int m : sc.sweep.inputs)
      for (auto s : seeds) jobs.push_back({h, m, s});
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return std::tie(a.h, a.m, a.seed) < std::tie(b.h, b.m, b.seed);
  });
  jobs.erase(std::unique(jobs.begin(), jobs.end(),
                         [](const Job& a, const Job& b) {
                           return std::tie(a.h, a.m, a.seed) == std::tie(b.h, b.m, b.seed);
                         }),
             jobs.end());

  std::vector<SweepRow> rows(jobs.size());
  detail::parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& j = jobs[i];
    const Lut* lut = sc.reference_adc.use_lut ? &luts.at(j.seed) : nullptr;
    rows[i] = sweep_point(sc, j.h, j.m, j.seed, lut);
  });
  return rows;
}

inline void write_sweep_csv(const std::filesystem::path& p, std::span<const SweepRow> rows) {
  auto out = detail::open_out(p);
  out << "h,m,seed,sndr_uncal_db,sfdr_uncal_db,sndr_db,sfdr_db,thd_db,enob_bits,fom_j_per_step,"
         "train_mse,validation_mse\n";
  for (const auto& r : rows) {
    const auto& u = *r.uncalibrated.dynamic;
    const auto& c = *r.calibrated.dynamic;
    out << r.h << ',' << r.m << ',' << r.seed << ',' << format_number(u.sndr_db) << ','
        << format_number(u.sfdr_db) << ',' << format_number(c.sndr_db) << ','
        << format_number(c.sfdr_db) << ',' << format_number(c.thd_db) << ','
        << format_number(c.enob_bits) << ',' << format_number(c.fom_j_per_step) << ','
        << format_number(r.train_mse) << ',' << format_number(r.validation_mse) << '\n';
  }
  detail::finish(out, p);
}

}  // namespace sarcal

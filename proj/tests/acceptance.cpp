// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "sarcal/harness.hpp"

using namespace sarcal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %2d %-4s %-28s %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", title,
              o.detail.c_str(), s);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario config(const char* name) { return load_scenario(fs::path(SARCAL_CONFIG_DIR) / name); }

struct Trained {
  Capture cap;
  TrainResult tr;
  Evaluation ev;
};

Trained run_tone(const Scenario& sc, const Lut& lut, std::uint64_t seed) {
  Trained t{simulate_tone(sc, seed), {}, {}};
  t.tr = train_on_capture(sc, t.cap, &lut, seed);
  t.ev = evaluate(sc, t.cap, &t.tr.model, nullptr, nullptr, seed);
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SARCAL_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

int brute_force_code(double v, double v_ref, int bits) {
  const int n = 1 << bits;
  const double lsb = 2.0 * v_ref / n;
  int code = 0;
  for (int k = 1; k < n; ++k)
    if (v >= -v_ref + (k - 0.5) * lsb) code = k;
  return code;
}

}  // namespace

int main() {
  const std::uint64_t seed = 1;
  const Scenario def = config("default.json");

  criterion(1, "ideal-chain oracle", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = config("ideal.json");
    sc.linearity.enabled = false;
    sc.capture.training_examples = 64;
    const Capture cap = simulate_tone(sc, 1);
    const auto sndr = evaluate(sc, cap, nullptr, nullptr, nullptr, 1).report.uncalibrated.dynamic->sndr_db;
    // DNL from a long coherent code-density record of the same converter.
    const std::size_t n = std::size_t{1} << 20;
    const auto cb = coherent_bin(sc.main_adc.fs, static_cast<std::int64_t>(n), 1.03e6);
    const Signal stim = histogram_stimulus(sc.main_adc.v_ref, cb.f_actual, 0.02);
    AdcInstance adc = main_instance(sc, 1);
    const CodeStream s = convert_stream(adc, stim, n);
    const auto lin = dnl_inl_sine(std::span<const int>(s.codes), 12, stim);
    const double t = seconds_since(t0);
    return Outcome{std::abs(sndr - 74.0) <= 0.3 && lin.max_abs_dnl < 0.05 && t < 5.0,
                   fmt("SNDR %.2f dB (74.0 +/- 0.3), max|DNL| %.4f LSB (< 0.05), %.1f s (< 5)", sndr,
                       lin.max_abs_dnl, t)};
  });

  criterion(2, "4-bit SAR oracle", [] {
    const auto t0 = std::chrono::steady_clock::now();
    AdcConfig c;
    c.resolution_bits = 4;
    c.bit_weights = binary_bit_weights(4);
    c.temperature = 0.0;
    AdcInstance a = build_instance(c, {}, 1);
    const int n = 1 << 10;
    int agree = 0;
    for (int i = 0; i < n; ++i) {
      const double v = -c.v_ref + 2 * c.v_ref * (i + 0.5) / n;
      agree += a.sample_and_convert(v, i / c.fs).code == brute_force_code(v, c.v_ref, 4);
    }
    const double t = seconds_since(t0);
    return Outcome{agree == n && t < 1.0, fmt("%d/%d codes agree, %.3f s (< 1)", agree, n, t)};
  });

  criterion(3, "reference LUT gain", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = def;
    sc.main_adc.temperature = 0.0;
    sc.reference_adc.comp_noise_sigma = 0.0;
    const ReferenceCalibration rc = calibrate_reference(sc, seed);
    const double t = seconds_since(t0);
    const double ds = rc.corrected.sndr_db - rc.raw.sndr_db;
    const double df = rc.corrected.sfdr_db - rc.raw.sfdr_db;
    return Outcome{ds >= 3.0 && df >= 15.0 && t < 120.0,
                   fmt("SNDR %.2f -> %.2f (+%.2f >= 3), SFDR %.2f -> %.2f (+%.2f >= 15), %.0f s (< 120)",
                       rc.raw.sndr_db, rc.corrected.sndr_db, ds, rc.raw.sfdr_db,
                       rc.corrected.sfdr_db, df, t)};
  });

  // Default reference LUT for seed 1, shared by the criteria below.
  const auto t_lut = std::chrono::steady_clock::now();
  const ReferenceCalibration ref_cal = calibrate_reference(def, seed);
  const double lut_seconds = seconds_since(t_lut);
  std::printf("reference LUT (seed 1, default noise): check SNDR %.2f -> %.2f dB, SFDR %.2f -> %.2f dB [%.1f s]\n",
              ref_cal.raw.sndr_db, ref_cal.corrected.sndr_db, ref_cal.raw.sfdr_db,
              ref_cal.corrected.sfdr_db, lut_seconds);
  const Lut& lut = ref_cal.lut;

  std::optional<Trained> main_run;
  criterion(4, "end-to-end calibration", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    main_run = run_tone(def, lut, seed);
    const double t = seconds_since(t0) + lut_seconds;
    const auto& u = *main_run->ev.report.uncalibrated.dynamic;
    const auto& c = *main_run->ev.report.calibrated->dynamic;
    const double ds = c.sndr_db - u.sndr_db, df = c.sfdr_db - u.sfdr_db;
    const bool ok = std::abs(u.sndr_db - 29.0) <= 4.0 && std::abs(u.sfdr_db - 35.0) <= 5.0 &&
                    ds >= 25.0 && df >= 30.0 && t < 600.0;
    return Outcome{ok, fmt("uncal SNDR %.2f (29 +/- 4) SFDR %.2f (35 +/- 5); cal SNDR %.2f SFDR %.2f; "
                           "dSNDR %.2f (>= 25) dSFDR %.2f (>= 30), %.0f s (< 600)",
                           u.sndr_db, u.sfdr_db, c.sndr_db, c.sfdr_db, ds, df, t)};
  });

  criterion(5, "near-Nyquist calibration", [&] {
    const Scenario sc = config("nyquist.json");
    const Trained r = run_tone(sc, lut, seed);
    const auto& u = *r.ev.report.uncalibrated.dynamic;
    const auto& c = *r.ev.report.calibrated->dynamic;
    const double ds = c.sndr_db - u.sndr_db, df = c.sfdr_db - u.sfdr_db;
    return Outcome{ds >= 20.0 && df >= 25.0,
                   fmt("f %.4g MHz: SNDR %.2f -> %.2f (d %.2f >= 20), SFDR %.2f -> %.2f (d %.2f >= 25)",
                       sc.resolved_signal().frequencies[0] / 1e6, u.sndr_db, c.sndr_db, ds,
                       u.sfdr_db, c.sfdr_db, df)};
  });

  criterion(6, "static linearity", [&] {
    const Capture lin = simulate_linearity(def, seed);
    const TrainResult tr = train_on_capture(def, lin, &lut, seed);
    const Evaluation ev = evaluate(def, main_run ? main_run->cap : simulate_tone(def, seed), nullptr,
                                   &lin, &tr.model, seed);
    const auto& u = *ev.linearity_uncal;
    const auto& c = *ev.linearity_cal;
    const bool ok = u.max_abs_dnl > 20.0 && c.max_abs_dnl <= 2.0 && c.max_abs_inl <= 3.0;
    return Outcome{ok, fmt("uncal max|DNL| %.2f (> 20) INL %.2f; cal max|DNL| %.2f (<= 2) max|INL| %.2f "
                           "(<= 3), missing codes %zu",
                           u.max_abs_dnl, u.inl_extreme, c.max_abs_dnl, c.max_abs_inl,
                           c.missing_codes.size())};
  });

  criterion(7, "two-tone intermodulation", [&] {
    const Scenario sc = config("two_tone.json");
    const Trained r = run_tone(sc, lut, seed);
    const auto& u = *r.ev.report.uncalibrated.intermod;
    const auto& c = *r.ev.report.calibrated->intermod;
    const double d2 = c.im2_db - u.im2_db, d3 = c.im3_db - u.im3_db;
    return Outcome{d2 >= 20.0 && d3 >= 25.0,
                   fmt("IM2 %.2f -> %.2f (d %.2f >= 20), IM3 %.2f -> %.2f (d %.2f >= 25)", u.im2_db,
                       c.im2_db, d2, u.im3_db, c.im3_db, d3)};
  });

  criterion(8, "gradient check", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const Capture cap = main_run ? main_run->cap : simulate_tone(def, seed);
    const TrainingSet full = training_set_for(def, cap, &lut);
    TrainingSet part;
    part.cols = full.cols;
    for (std::size_t r = 0; r < 256; ++r) part.push(full.row(r * 97), full.targets[r * 97], r);
    AnnModel model = init_model(40, 41, 5, 1.0);
    const double err = gradient_check(model, part, 200);
    const double err_trained = main_run ? gradient_check(main_run->tr.model, part, 200, 8) : 0.0;
    const double worst = std::max(err, err_trained);
    const double t = seconds_since(t0);
    return Outcome{worst < 1e-5 && t < 10.0,
                   fmt("max rel. error %.2e over 2 x 200 probes (< 1e-5), %.1f s (< 10)", worst, t)};
  });

  criterion(9, "capacity saturation", [&] {
    Scenario sc = def;
    sc.sweep.hidden = {5, 40, 80};
    sc.sweep.inputs = {41};
    sc.sweep.seeds = {1, 2, 3, 4, 5};
    const std::map<std::uint64_t, Lut> prebuilt{{seed, lut}};
    const auto rows = run_sweep(sc, 0, &prebuilt);
    std::map<int, double> mean;
    for (const auto& r : rows) mean[r.h] += r.calibrated.dynamic->sndr_db / 5.0;
    const bool ok = mean[40] >= mean[5] + 3.0 && std::abs(mean[80] - mean[40]) < 1.0;
    return Outcome{ok, fmt("mean SNDR h=5 %.2f, h=40 %.2f, h=80 %.2f; h40-h5 %.2f (>= 3), |h80-h40| %.2f (< 1)",
                           mean[5], mean[40], mean[80], mean[40] - mean[5],
                           std::abs(mean[80] - mean[40]))};
  });

  criterion(10, "fixed-point parity", [&] {
    if (!main_run) return Outcome{false, "criterion 4 run missing"};
    const auto& f = *main_run->ev.report.calibrated->dynamic;
    const auto& q = *main_run->ev.report.calibrated_fixed_point->dynamic;
    const double d = std::abs(q.sndr_db - f.sndr_db);
    return Outcome{d <= 1.0, fmt("float SNDR %.2f, %d-bit SNDR %.2f, |diff| %.3f dB (<= 1)", f.sndr_db,
                                 def.quantization_bits, q.sndr_db, d)};
  });

  criterion(11, "parameter count", [] {
    const AnnModel m = init_model(40, 41, 1);
    return Outcome{m.weight_count() == 1680 && m.total_parameter_count() == 1721,
                   fmt("%zu weights, %zu total (1680 / 1721)", m.weight_count(), m.total_parameter_count())};
  });

  criterion(12, "determinism", [] {
    const fs::path dir = fs::temp_directory_path() / "sarcal_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "light.json") << "{ \"base\": \"" << SARCAL_CONFIG_DIR << "/default.json\",\n"
        R"(  "capture": { "n_fft": 8192, "training_examples": 4096 },
  "linearity": { "samples": 65536 },
  "lut": { "runs": 4, "samples_per_run": 65536 },
  "training": { "max_samples": 16384 },
  "model": { "hidden": 8 },
  "sweep": { "hidden": [4, 8], "inputs": [9, 41], "seeds": [1, 2] }
})";
    const std::string cfg = "--config " + (dir / "light.json").string() + " --seed 3 --out ";
    int bad_exit = 0;
    for (const char* run : {"a", "b"})
      for (const char* cmd : {"simulate", "calibrate-ref", "train", "evaluate"})
        bad_exit += run_cli(std::string(cmd) + " " + cfg + (dir / run).string(), dir / "log.txt") != 0;
    bad_exit += run_cli("sweep --threads 1 " + cfg + (dir / "s1").string(), dir / "log.txt") != 0;
    bad_exit += run_cli("sweep --threads 4 " + cfg + (dir / "s4").string(), dir / "log.txt") != 0;
    int files = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      ++files;
      differ += slurp(e.path()) != slurp(dir / "b" / e.path().filename());
    }
    const bool sweep_same = slurp(dir / "s1" / "sweep.csv") == slurp(dir / "s4" / "sweep.csv") &&
                            !slurp(dir / "s1" / "sweep.csv").empty();
    fs::remove_all(dir);
    return Outcome{bad_exit == 0 && differ == 0 && files >= 15 && sweep_same,
                   fmt("%d files compared, %d differ; serial vs 4-thread sweep %s; %d failed commands",
                       files, differ, sweep_same ? "identical" : "DIFFERENT", bad_exit)};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

// sarcal: command-line front end for the calibration experiments.
//
//   sarcal simulate      --config F --seed S --out DIR
//   sarcal calibrate-ref --config F --seed S --out DIR
//   sarcal train         --config F --seed S --out DIR
//   sarcal evaluate      --config F --seed S --out DIR
//   sarcal sweep         --config F --seed S --out DIR [--threads N]
//
// Later steps read what earlier ones wrote into DIR.
// Exit status: 0 ok, 1 usage or configuration error, 2 runtime failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sarcal/harness.hpp"

namespace fs = std::filesystem;
using namespace sarcal;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
};

struct Files {
  fs::path dir;
  fs::path main() const { return dir / "main_stream.csv"; }
  fs::path ref() const { return dir / "ref_stream.csv"; }
  fs::path lin_main() const { return dir / "linearity_main_stream.csv"; }
  fs::path lin_ref() const { return dir / "linearity_ref_stream.csv"; }
  fs::path lut() const { return dir / "lut.csv"; }
  fs::path model() const { return dir / "model.json"; }
  fs::path lin_model() const { return dir / "linearity_model.json"; }
};

void require(const fs::path& p) {
  if (!fs::exists(p)) throw IoError("missing input " + p.string());
}

Capture load_capture(const Scenario& sc, const fs::path& main, const fs::path& ref,
                     const Signal& signal, const CaptureLayout& layout) {
  require(main);
  require(ref);
  Capture c;
  c.signal = signal;
  c.layout = layout;
  c.main = read_code_stream(main, sc.main_adc.fs, sc.main_adc.resolution_bits);
  c.ref = read_code_stream(ref, sc.main_adc.fs / kRefRatio, sc.main_adc.resolution_bits);
  if (c.main.size() != layout.main_samples() || c.ref.size() != layout.ref_samples())
    throw IoError("stream lengths do not match the scenario; rerun simulate");
  return c;
}

std::optional<Lut> load_lut(const Scenario& sc, const Files& f) {
  if (!sc.reference_adc.use_lut) return std::nullopt;
  require(f.lut());
  return read_lut(f.lut());
}

int cmd_simulate(const Scenario& sc, const json& merged, const Common& o, const Files& f) {
  const Capture tone = simulate_tone(sc, o.seed);
  write_code_stream(f.main(), tone.main);
  write_code_stream(f.ref(), tone.ref);
  if (sc.linearity.enabled) {
    const Capture lin = simulate_linearity(sc, o.seed);
    write_code_stream(f.lin_main(), lin.main);
    write_code_stream(f.lin_ref(), lin.ref);
  }
  write_json(f.dir / "scenario.json", merged);
  std::cout << "main " << tone.main.size() << " samples, reference " << tone.ref.size()
            << " samples -> " << f.dir.string() << '\n';
  return 0;
}

int cmd_calibrate_ref(const Scenario& sc, const Common& o, const Files& f) {
  const ReferenceCalibration rc = calibrate_reference(sc, o.seed);
  write_lut(f.lut(), rc.lut, reference_check_json(rc));
  std::printf("reference check tone: SNDR %.2f -> %.2f dB, SFDR %.2f -> %.2f dB\n",
              rc.raw.sndr_db, rc.corrected.sndr_db, rc.raw.sfdr_db, rc.corrected.sfdr_db);
  return 0;
}

void train_one(const Scenario& sc, const Capture& cap, const Lut* lut, std::uint64_t seed,
               const fs::path& model_path, const fs::path& history_path,
               const fs::path* set_path) {
  if (set_path) write_training_set(*set_path, training_set_for(sc, cap, lut));
  const TrainResult tr = train_on_capture(sc, cap, lut, seed);
  const QuantizedModel q = quantize(tr.model, sc.quantization_bits);
  write_model(model_path, tr.model, sc.features, &q);
  write_loss_history(history_path, tr.history);
  const auto& last = tr.history.back();
  std::printf("%s: %zu samples, train mse %.3e, validation mse %.3e\n",
              model_path.filename().string().c_str(), last.samples, last.train_mse,
              last.validation_mse);
}

int cmd_train(const Scenario& sc, const Common& o, const Files& f, bool dump_set) {
  const auto lut = load_lut(sc, f);
  const Lut* lp = lut ? &*lut : nullptr;
  const Capture tone = load_capture(sc, f.main(), f.ref(), sc.resolved_signal(), tone_layout(sc));
  const fs::path set_path = f.dir / "training_set.csv";
  train_one(sc, tone, lp, o.seed, f.model(), f.dir / "loss_history.csv",
            dump_set ? &set_path : nullptr);
  if (sc.linearity.enabled) {
    const Capture lin = load_capture(sc, f.lin_main(), f.lin_ref(), linearity_stimulus(sc),
                                     linearity_layout(sc));
    train_one(sc, lin, lp, o.seed, f.lin_model(), f.dir / "linearity_loss_history.csv", nullptr);
  }
  return 0;
}

std::optional<AnnModel> load_model_for(const Scenario& sc, const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  LoadedModel lm = read_model(p);
  if (lm.features.m != sc.features.m ||
      lm.features.include_derivative != sc.features.include_derivative ||
      lm.features.resolution_bits != sc.features.resolution_bits)
    throw IoError(p.string() + ": feature layout differs from the scenario");
  return std::move(lm.model);
}

void print_metrics(const char* label, const MetricSet& m) {
  std::printf("%-24s", label);
  if (m.dynamic)
    std::printf(" SNDR %6.2f dB  SFDR %6.2f dB  ENOB %5.2f  FoM %.3g fJ/step", m.dynamic->sndr_db,
                m.dynamic->sfdr_db, m.dynamic->enob_bits, m.dynamic->fom_j_per_step * 1e15);
  if (m.intermod) std::printf(" IM2 %6.2f dBc  IM3 %6.2f dBc", m.intermod->im2_db, m.intermod->im3_db);
  if (m.linearity)
    std::printf(" DNL %.2f LSB  INL %.2f LSB", m.linearity->max_abs_dnl, m.linearity->inl_extreme);
  std::printf("\n");
}

int cmd_evaluate(const Scenario& sc, const Common& o, const Files& f) {
  const Capture tone = load_capture(sc, f.main(), f.ref(), sc.resolved_signal(), tone_layout(sc));
  const auto model = load_model_for(sc, f.model());
  std::optional<Capture> lin;
  std::optional<AnnModel> lin_model;
  if (sc.linearity.enabled) {
    lin = load_capture(sc, f.lin_main(), f.lin_ref(), linearity_stimulus(sc), linearity_layout(sc));
    lin_model = load_model_for(sc, f.lin_model());
  }
  const Evaluation ev = evaluate(sc, tone, model ? &*model : nullptr, lin ? &*lin : nullptr,
                                 lin_model ? &*lin_model : nullptr, o.seed);
  write_json(f.dir / "report.json", report_to_json(ev.report));
  if (ev.spectrum_uncal) write_spectrum_csv(f.dir / "spectrum_uncal.csv", *ev.spectrum_uncal);
  if (ev.spectrum_cal) write_spectrum_csv(f.dir / "spectrum_cal.csv", *ev.spectrum_cal);
  if (ev.linearity_uncal) write_linearity_csv(f.dir / "dnl_inl_uncal.csv", *ev.linearity_uncal);
  if (ev.linearity_cal) write_linearity_csv(f.dir / "dnl_inl_cal.csv", *ev.linearity_cal);
  print_metrics("uncalibrated", ev.report.uncalibrated);
  if (ev.report.calibrated) print_metrics("calibrated", *ev.report.calibrated);
  if (ev.report.calibrated_fixed_point)
    print_metrics("calibrated (fixed point)", *ev.report.calibrated_fixed_point);
  return 0;
}

int cmd_sweep(const Scenario& sc, const Files& f, unsigned threads) {
  const auto rows = run_sweep(sc, threads);
  write_sweep_csv(f.dir / "sweep.csv", rows);
  for (const auto& r : rows)
    std::printf("h %3d  m %3d  seed %llu  SNDR %6.2f dB  SFDR %6.2f dB\n", r.h, r.m,
                static_cast<unsigned long long>(r.seed), r.calibrated.dynamic->sndr_db,
                r.calibrated.dynamic->sfdr_db);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAR ADC behavioral simulation and neural-network calibration"};
  app.require_subcommand(1);
  Common opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--out", opt.out, "working directory")->required();
  };
  auto* sim = app.add_subcommand("simulate", "capture main and reference code streams");
  auto* cal = app.add_subcommand("calibrate-ref", "build the reference-converter LUT");
  auto* trn = app.add_subcommand("train", "train the correction network");
  auto* evl = app.add_subcommand("evaluate", "write the before/after metrics report");
  auto* swp = app.add_subcommand("sweep", "grid of hidden size, input width and seed");
  for (auto* s : {sim, cal, trn, evl, swp}) add_common(s);
  bool dump_set = false;
  trn->add_flag("--dump-training-set", dump_set, "also write training_set.csv");
  unsigned threads = 0;
  swp->add_option("--threads", threads, "worker threads, 0 = scenario default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    json merged;
    const Scenario sc = load_scenario(opt.config, &merged);
    Files files{opt.out};
    fs::create_directories(files.dir);
    if (sim->parsed()) return cmd_simulate(sc, merged, opt, files);
    if (cal->parsed()) return cmd_calibrate_ref(sc, opt, files);
    if (trn->parsed()) return cmd_train(sc, opt, files, dump_set);
    if (evl->parsed()) return cmd_evaluate(sc, opt, files);
    if (swp->parsed()) return cmd_sweep(sc, files, threads);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingDivergence& e) {
    std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

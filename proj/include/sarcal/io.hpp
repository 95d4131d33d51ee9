#pragma once

// File formats. Numbers are written in shortest round-trip form so a value
// read back is bit-identical to the one written.
//
//   code stream   CSV  index,time_s,code
//   LUT           CSV  code,corrected_code  (+ JSON sidecar)
//   training set  CSV  f0..f{m-1},target
//   spectrum      CSV  bin,power_db
//   DNL/INL       CSV  code,dnl,inl
//   model         JSON {"format": "sarcal-ann", "version": 1, ...}

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "sarcal/adc_model.hpp"
#include "sarcal/ann_calib.hpp"
#include "sarcal/error.hpp"
#include "sarcal/feature_extract.hpp"
#include "sarcal/metrics.hpp"
#include "sarcal/ref_cal.hpp"

namespace sarcal {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw IoError("format_number: conversion failed");
  return std::string(buf, end);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }

namespace detail {

template <typename T>
T parse_field(std::string_view s, const std::string& where) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size())
    throw IoError(where + ": cannot parse '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string() + " for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw IoError("write to " + p.string() + " failed");
}

/// Reads a CSV with the expected header; calls row(fields, line_no) per line.
template <typename RowFn>
void read_csv(const std::filesystem::path& p, std::string_view header, RowFn&& row) {
  auto in = open_in(p);
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw IoError(p.string() + ": expected header '" + std::string(header) + "'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    row(split_csv(line), p.string() + ":" + std::to_string(line_no));
  }
}

}  // namespace detail

// ---------------------------------------------------------------- code streams

inline void write_code_stream(const std::filesystem::path& p, const CodeStream& s) {
  auto out = detail::open_out(p);
  out << "index,time_s,code\n";
  for (std::size_t k = 0; k < s.size(); ++k)
    out << k << ',' << format_number(s.times[k]) << ',' << s.codes[k] << '\n';
  detail::finish(out, p);
}

/// fs and resolution are not stored in the CSV; the caller supplies them.
inline CodeStream read_code_stream(const std::filesystem::path& p, double fs, int bits) {
  CodeStream s;
  s.fs = fs;
  s.resolution_bits = bits;
  const int top = (1 << bits) - 1;
  detail::read_csv(p, "index,time_s,code", [&](const auto& f, const std::string& where) {
    if (f.size() != 3) throw IoError(where + ": expected 3 fields");
    if (detail::parse_field<std::size_t>(f[0], where) != s.size())
      throw IoError(where + ": index out of sequence");
    s.times.push_back(detail::parse_field<double>(f[1], where));
    const int code = detail::parse_field<int>(f[2], where);
    if (code < 0 || code > top) throw IoError(where + ": code out of range");
    s.codes.push_back(code);
  });
  if (s.codes.empty()) throw IoError(p.string() + ": no samples");
  return s;
}

// ------------------------------------------------------------------------ LUT

inline void write_lut(const std::filesystem::path& csv, const Lut& lut, const json& extra = {}) {
  auto out = detail::open_out(csv);
  out << "code,corrected_code\n";
  for (std::size_t k = 0; k < lut.map.size(); ++k) out << k << ',' << format_number(lut.map[k]) << '\n';
  detail::finish(out, csv);

  json meta = {{"resolution_bits", lut.resolution_bits},
               {"runs", lut.runs},
               {"samples_per_run", lut.samples_per_run},
               {"seed", lut.seed},
               {"stimulus", lut.stimulus},
               {"fraction_bits", kLutFractionBits}};
  if (!extra.is_null()) meta.update(extra);
  auto side = csv;
  side.replace_extension(".json");
  auto js = detail::open_out(side);
  js << meta.dump(2) << '\n';
  detail::finish(js, side);
}

inline Lut read_lut(const std::filesystem::path& csv) {
  Lut lut;
  detail::read_csv(csv, "code,corrected_code", [&](const auto& f, const std::string& where) {
    if (f.size() != 2) throw IoError(where + ": expected 2 fields");
    if (detail::parse_field<std::size_t>(f[0], where) != lut.map.size())
      throw IoError(where + ": code out of sequence");
    lut.map.push_back(detail::parse_field<double>(f[1], where));
  });
  auto side = csv;
  side.replace_extension(".json");
  if (std::filesystem::exists(side)) {
    auto in = detail::open_in(side);
    const json meta = json::parse(in);
    lut.resolution_bits = meta.at("resolution_bits").get<int>();
    lut.runs = meta.value("runs", 0);
    lut.samples_per_run = meta.value("samples_per_run", std::size_t{0});
    lut.seed = meta.value("seed", std::uint64_t{0});
    lut.stimulus = meta.value("stimulus", std::string{});
  } else {
    int bits = 0;
    while ((std::size_t{1} << bits) < lut.map.size()) ++bits;
    lut.resolution_bits = bits;
  }
  lut.validate();
  return lut;
}

// --------------------------------------------------------------- training set

inline void write_training_set(const std::filesystem::path& p, const TrainingSet& set) {
  auto out = detail::open_out(p);
  for (std::size_t j = 0; j < set.cols; ++j) out << 'f' << j << ',';
  out << "target\n";
  for (std::size_t r = 0; r < set.rows(); ++r) {
    for (double v : set.row(r)) out << format_number(v) << ',';
    out << format_number(set.targets[r]) << '\n';
  }
  detail::finish(out, p);
}

inline TrainingSet read_training_set(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  std::string line;
  if (!std::getline(in, line)) throw IoError(p.string() + ": empty file");
  const auto head = detail::split_csv(line);
  if (head.size() < 2 || head.back() != "target") throw IoError(p.string() + ": bad header");
  TrainingSet set;
  set.cols = head.size() - 1;
  std::vector<double> f(set.cols);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = p.string() + ":" + std::to_string(line_no);
    const auto fields = detail::split_csv(line);
    if (fields.size() != set.cols + 1) throw IoError(where + ": wrong field count");
    for (std::size_t j = 0; j < set.cols; ++j) f[j] = detail::parse_field<double>(fields[j], where);
    set.push(f, detail::parse_field<double>(fields.back(), where), set.rows());
  }
  return set;
}

// ---------------------------------------------------------------------- model

inline constexpr const char* kModelFormat = "sarcal-ann";
inline constexpr int kModelVersion = 1;

inline json model_to_json(const AnnModel& model, const FeatureSpec& spec,
                          const QuantizedModel* q = nullptr) {
  auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  json j = {{"format", kModelFormat},
            {"version", kModelVersion},
            {"h", model.hidden()},
            {"m", model.inputs()},
            {"weight_count", model.weight_count()},
            {"total_parameters", model.total_parameter_count()},
            {"features",
             {{"m", spec.m},
              {"include_derivative", spec.include_derivative},
              {"resolution_bits", spec.resolution_bits}}},
            {"w1", vec(model.w1())},
            {"b1", vec(model.b1())},
            {"w2", vec(model.w2())},
            {"b2", model.b2()}};
  if (q) {
    j["quantization"] = {{"bits", q->bits},
                         {"tanh_table_size", kTanhTableSize},
                         {"tanh_table_range", kTanhTableRange},
                         {"exponents",
                          {{"w1", q->w1.exponent},
                           {"b1", q->b1.exponent},
                           {"w2", q->w2.exponent},
                           {"b2", q->b2.exponent}}}};
  } else {
    j["quantization"] = nullptr;
  }
  return j;
}

struct LoadedModel {
  AnnModel model;
  FeatureSpec features;
  std::optional<QuantizedModel> quantized;
};

inline LoadedModel model_from_json(const json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != kModelFormat)
    throw IoError("model: not a " + std::string(kModelFormat) + " document");
  const int version = j.at("version").get<int>();
  if (version != kModelVersion)
    throw IoError("model: unsupported version " + std::to_string(version));
  LoadedModel out;
  const int h = j.at("h").get<int>();
  const int m = j.at("m").get<int>();
  out.model = AnnModel(h, m);
  auto fill = [&](const char* key, std::span<double> dst) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != dst.size())
      throw IoError(std::string("model: ") + key + " has " + std::to_string(v.size()) +
                    " entries, expected " + std::to_string(dst.size()));
    std::copy(v.begin(), v.end(), dst.begin());
  };
  fill("w1", out.model.w1());
  fill("b1", out.model.b1());
  fill("w2", out.model.w2());
  out.model.b2() = j.at("b2").get<double>();
  const auto& f = j.at("features");
  out.features.m = f.at("m").get<int>();
  out.features.include_derivative = f.at("include_derivative").get<bool>();
  out.features.resolution_bits = f.at("resolution_bits").get<int>();
  if (out.features.m != m) throw IoError("model: features.m != m");
  if (const auto it = j.find("quantization"); it != j.end() && !it->is_null()) {
    const auto& e = it->at("exponents");
    QuantizeOptions opt;
    opt.w1_exponent = e.at("w1").get<int>();
    opt.b1_exponent = e.at("b1").get<int>();
    opt.w2_exponent = e.at("w2").get<int>();
    opt.b2_exponent = e.at("b2").get<int>();
    out.quantized = quantize(out.model, it->at("bits").get<int>(), opt);
  }
  return out;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  auto out = detail::open_out(p);
  out << j.dump(2) << '\n';
  detail::finish(out, p);
}

inline json read_json(const std::filesystem::path& p, bool allow_comments = false) {
  auto in = detail::open_in(p);
  try {
    return json::parse(in, nullptr, true, allow_comments);
  } catch (const json::parse_error& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

inline void write_model(const std::filesystem::path& p, const AnnModel& model,
                        const FeatureSpec& spec, const QuantizedModel* q = nullptr) {
  write_json(p, model_to_json(model, spec, q));
}

inline LoadedModel read_model(const std::filesystem::path& p) {
  try {
    return model_from_json(read_json(p));
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

inline void write_loss_history(const std::filesystem::path& p, std::span<const LossRecord> h) {
  auto out = detail::open_out(p);
  out << "epoch,samples,train_mse,validation_mse\n";
  for (const auto& r : h)
    out << r.epoch << ',' << r.samples << ',' << format_number(r.train_mse) << ','
        << format_number(r.validation_mse) << '\n';
  detail::finish(out, p);
}

// -------------------------------------------------------------------- metrics

inline void write_spectrum_csv(const std::filesystem::path& p, const SpectrumReport& r) {
  auto out = detail::open_out(p);
  out << "bin,power_db\n";
  for (std::size_t k = 0; k < r.power.size(); ++k)
    out << k << ',' << format_number(r.power_dbc(k)) << '\n';
  detail::finish(out, p);
}

inline void write_linearity_csv(const std::filesystem::path& p, const LinearityReport& r) {
  auto out = detail::open_out(p);
  out << "code,dnl,inl\n";
  // dnl[k-1] belongs to code k; inl is taken at the lower transition of code k
  for (std::size_t k = 1; k <= r.dnl.size(); ++k)
    out << k << ',' << format_number(r.dnl[k - 1]) << ',' << format_number(r.inl[k - 1]) << '\n';
  detail::finish(out, p);
}

}  // namespace sarcal

#pragma once

// Shallow error-estimation network: one tanh hidden layer and one linear
// output neuron, trained with mini-batch Adam on the 1/2-MSE loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sarcal/error.hpp"
#include "sarcal/feature_extract.hpp"

namespace sarcal {

/// Parameters live in one flat vector: [w1 (h x m, row-major) | b1 (h) | w2 (h) | b2].
class AnnModel {
 public:
  AnnModel() = default;
  AnnModel(int hidden, int inputs) : h_(hidden), m_(inputs) {
    if (hidden < 1 || inputs < 1) throw UsageError("AnnModel: h and m must be >= 1");
    p_.assign(total_parameter_count(), 0.0);
  }

  int hidden() const { return h_; }
  int inputs() const { return m_; }

  std::size_t weight_count() const { return hm() + uh(); }
  std::size_t total_parameter_count() const { return hm() + 2 * uh() + 1; }

  std::span<double> params() { return p_; }
  std::span<const double> params() const { return p_; }

  std::span<double> w1() { return {p_.data(), hm()}; }
  std::span<double> b1() { return {p_.data() + hm(), uh()}; }
  std::span<double> w2() { return {p_.data() + hm() + uh(), uh()}; }
  double& b2() { return p_.back(); }
  std::span<const double> w1() const { return {p_.data(), hm()}; }
  std::span<const double> b1() const { return {p_.data() + hm(), uh()}; }
  std::span<const double> w2() const { return {p_.data() + hm() + uh(), uh()}; }
  double b2() const { return p_.back(); }

  bool all_finite() const {
    return std::all_of(p_.begin(), p_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const AnnModel&, const AnnModel&) = default;

 private:
  std::size_t uh() const { return static_cast<std::size_t>(h_); }
  std::size_t hm() const { return static_cast<std::size_t>(h_) * static_cast<std::size_t>(m_); }

  int h_ = 0;
  int m_ = 0;
  std::vector<double> p_;
};

/// Glorot-uniform weights, zero biases. `output_scale` shrinks the output
/// layer draw; 1 is plain Glorot.
inline AnnModel init_model(int h, int m, std::uint64_t seed, double output_scale = 1.0) {
  AnnModel model(h, m);
  std::mt19937_64 rng(seed);
  const double lim1 = std::sqrt(6.0 / static_cast<double>(m + h));
  const double lim2 = std::sqrt(6.0 / static_cast<double>(h + 1));
  std::uniform_real_distribution<double> u1(-lim1, lim1), u2(-lim2, lim2);
  for (double& w : model.w1()) w = u1(rng);
  for (double& w : model.w2()) w = output_scale * u2(rng);
  return model;
}

namespace detail {

/// Forward pass; hidden activations written to `act` (length h).
inline double forward(const AnnModel& model, std::span<const double> x, std::span<double> act) {
  const auto m = static_cast<std::size_t>(model.inputs());
  const auto w1 = model.w1();
  const auto b1 = model.b1();
  const auto w2 = model.w2();
  double y = model.b2();
  for (std::size_t j = 0; j < act.size(); ++j) {
    const double* row = w1.data() + j * m;
    double z = b1[j];
    for (std::size_t i = 0; i < m; ++i) z += row[i] * x[i];
    act[j] = std::tanh(z);
    y += w2[j] * act[j];
  }
  return y;
}

/// Adds the gradient of 0.5 * scale * r^2 for one example to `grad`.
inline void accumulate_gradient(const AnnModel& model, std::span<const double> x,
                                std::span<const double> act, double r, double scale,
                                std::span<double> grad) {
  const auto m = static_cast<std::size_t>(model.inputs());
  const auto h = static_cast<std::size_t>(model.hidden());
  const auto w2 = model.w2();
  const double g = r * scale;
  double* gw1 = grad.data();
  double* gb1 = gw1 + h * m;
  double* gw2 = gb1 + h;
  for (std::size_t j = 0; j < h; ++j) {
    gw2[j] += g * act[j];
    const double d = g * w2[j] * (1.0 - act[j] * act[j]);
    gb1[j] += d;
    double* row = gw1 + j * m;
    for (std::size_t i = 0; i < m; ++i) row[i] += d * x[i];
  }
  grad.back() += g;
}

}  // namespace detail

inline double predict(const AnnModel& model, std::span<const double> features) {
  if (features.size() != static_cast<std::size_t>(model.inputs()))
    throw UsageError("predict: feature length " + std::to_string(features.size()) +
                     " != m = " + std::to_string(model.inputs()));
  std::vector<double> act(static_cast<std::size_t>(model.hidden()));
  return detail::forward(model, features, act);
}

/// Loss 0.5 * mean(r^2) over the given rows and its gradient.
inline double loss_and_gradient(const AnnModel& model, const TrainingSet& set,
                                std::span<const std::size_t> rows, std::vector<double>* grad) {
  if (set.cols != static_cast<std::size_t>(model.inputs()))
    throw UsageError("loss_and_gradient: training set width != model inputs");
  std::vector<double> act(static_cast<std::size_t>(model.hidden()));
  if (grad) grad->assign(model.total_parameter_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto x = set.row(r);
    const double res = detail::forward(model, x, act) - set.targets[r];
    loss += 0.5 * res * res * scale;
    if (grad) detail::accumulate_gradient(model, x, act, res, scale, *grad);
  }
  return loss;
}

inline double mean_squared_error(const AnnModel& model, const TrainingSet& set,
                                 std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  return 2.0 * loss_and_gradient(model, set, rows, nullptr);
}

struct TrainConfig {
  double learning_rate = 3e-3;
  double final_learning_rate = 1e-5;  // linear decay target over the budget
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t max_samples = std::size_t{1} << 16;
  double validation_fraction = 0.1;
  std::size_t eval_every = std::size_t{1} << 13;  // samples between loss records
  bool whiten = true;          // train on decorrelated features, fold back after
  double whiten_floor = 1e-3;  // eigenvalue floor relative to the largest
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0))
      throw ConfigError("training.learning_rate", "must be > 0");
    if (batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (max_samples < 1) throw ConfigError("training.max_samples", "must be >= 1");
    if (eval_every < 1) throw ConfigError("training.eval_every", "must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ConfigError("training.validation_fraction", "must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("training.beta", "must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("training.epsilon", "must be > 0");
    if (!(whiten_floor > 0.0 && whiten_floor <= 1.0))
      throw ConfigError("training.whiten_floor", "must be in (0, 1]");
  }
};

/// Affine map z = T (x - mean) that decorrelates the features of a training
/// set. Training runs in z; fold() maps the result back onto raw features so
/// the stored model keeps the plain closed form.
struct FeatureWhitener {
  std::size_t m = 0;
  std::vector<double> mean;
  std::vector<double> transform;  // m x m, row-major

  static FeatureWhitener identity(std::size_t m) {
    FeatureWhitener w;
    w.m = m;
    w.mean.assign(m, 0.0);
    w.transform.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) w.transform[i * m + i] = 1.0;
    return w;
  }

  static FeatureWhitener fit(const TrainingSet& set, std::span<const std::size_t> rows,
                             double floor) {
    const auto m = static_cast<Eigen::Index>(set.cols);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
    for (std::size_t r : rows) mu += Eigen::Map<const Eigen::VectorXd>(set.row(r).data(), m);
    mu /= static_cast<double>(rows.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t r : rows) {
      const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(set.row(r).data(), m) - mu;
      cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(rows.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd lambda = es.eigenvalues();
    if (!(lambda.maxCoeff() > 0.0)) return identity(set.cols);
    const double lo = std::max(lambda.maxCoeff() * floor, std::numeric_limits<double>::min());
    Eigen::VectorXd inv_sd(m);
    for (Eigen::Index i = 0; i < m; ++i) inv_sd(i) = 1.0 / std::sqrt(std::max(lambda(i), lo));
    const Eigen::MatrixXd t = inv_sd.asDiagonal() * es.eigenvectors().transpose();

    FeatureWhitener w;
    w.m = set.cols;
    w.mean.assign(mu.data(), mu.data() + m);
    w.transform.resize(w.m * w.m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) w.transform[static_cast<std::size_t>(i * m + j)] = t(i, j);
    return w;
  }

  TrainingSet apply(const TrainingSet& set) const {
    TrainingSet out = set;
    std::vector<double> d(m);
    for (std::size_t r = 0; r < set.rows(); ++r) {
      const auto x = set.row(r);
      for (std::size_t j = 0; j < m; ++j) d[j] = x[j] - mean[j];
      double* z = out.features.data() + r * m;
      for (std::size_t i = 0; i < m; ++i) {
        const double* t = transform.data() + i * m;
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += t[j] * d[j];
        z[i] = acc;
      }
    }
    return out;
  }

  /// w1 <- w1 T, b1 <- b1 - (w1 T) mean.
  void fold(AnnModel& model) const {
    const auto h = static_cast<std::size_t>(model.hidden());
    auto w1 = model.w1();
    auto b1 = model.b1();
    std::vector<double> row(m);
    for (std::size_t k = 0; k < h; ++k) {
      double* w = w1.data() + k * m;
      std::fill(row.begin(), row.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double* t = transform.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) row[j] += w[i] * t[j];
      }
      double shift = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        w[j] = row[j];
        shift += row[j] * mean[j];
      }
      b1[k] -= shift;
    }
  }
};

struct LossRecord {
  int epoch = 0;
  std::size_t samples = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainResult {
  AnnModel model;
  std::vector<LossRecord> history;
};

/// Deterministic split of [0, rows) into (train, validation).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(
    std::size_t rows, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> perm(rows);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5EEDull);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(rows)));
  if (n_val >= rows) n_val = rows - 1;
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(val)};
}

/// Mini-batch Adam over at most cfg.max_samples examples, reshuffling at each
/// pass. One LossRecord per cfg.eval_every consumed samples plus a final one.
inline TrainResult train(AnnModel model, const TrainingSet& set, const TrainConfig& cfg) {
  cfg.validate();
  if (set.rows() == 0) throw UsageError("train: empty training set");
  if (set.cols != static_cast<std::size_t>(model.inputs()))
    throw UsageError("train: training set width != model inputs");

  auto [train_rows, val_rows] = split_rows(set.rows(), cfg.validation_fraction, cfg.seed);
  FeatureWhitener whitener;
  TrainingSet whitened;
  if (cfg.whiten) {
    whitener = FeatureWhitener::fit(set, train_rows, cfg.whiten_floor);
    whitened = whitener.apply(set);
  }
  const TrainingSet& data = cfg.whiten ? whitened : set;
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_par = model.total_parameter_count();
  std::vector<double> m1(n_par, 0.0), m2(n_par, 0.0), grad(n_par, 0.0);
  std::vector<double> act(static_cast<std::size_t>(model.hidden()));
  std::vector<std::size_t> order = train_rows;

  TrainResult result;
  std::size_t consumed = 0;
  std::size_t next_eval = cfg.eval_every;
  std::size_t pos = order.size();
  int epoch = 0;
  std::int64_t step = 0;
  double b1t = 1.0, b2t = 1.0;

  auto record = [&]() {
    LossRecord rec;
    rec.epoch = epoch;
    rec.samples = consumed;
    rec.train_mse = mean_squared_error(model, data, train_rows);
    rec.validation_mse = mean_squared_error(model, data, val_rows);
    if (!std::isfinite(rec.train_mse) || !model.all_finite())
      throw TrainingDivergence(epoch, "training diverged (non-finite loss) in epoch " +
                                          std::to_string(epoch));
    result.history.push_back(rec);
  };

  while (consumed < cfg.max_samples) {
    if (pos >= order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      pos = 0;
      ++epoch;
    }
    const std::size_t batch =
        std::min({cfg.batch_size, order.size() - pos, cfg.max_samples - consumed});
    std::fill(grad.begin(), grad.end(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t r = order[pos + b];
      const auto x = data.row(r);
      const double res = detail::forward(model, x, act) - data.targets[r];
      batch_loss += res * res;
      detail::accumulate_gradient(model, x, act, res, scale, grad);
    }
    if (!std::isfinite(batch_loss))
      throw TrainingDivergence(epoch, "training diverged (non-finite loss) in epoch " +
                                          std::to_string(epoch));
    pos += batch;
    consumed += batch;

    ++step;
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    const double frac = static_cast<double>(consumed) / static_cast<double>(cfg.max_samples);
    const double lr = cfg.learning_rate + (cfg.final_learning_rate - cfg.learning_rate) * frac;
    const double c1 = 1.0 / (1.0 - b1t);
    const double c2 = 1.0 / (1.0 - b2t);
    auto p = model.params();
    for (std::size_t i = 0; i < n_par; ++i) {
      m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
      m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      p[i] -= lr * (m1[i] * c1) / (std::sqrt(m2[i] * c2) + cfg.epsilon);
    }
    if (consumed >= next_eval || consumed >= cfg.max_samples) {
      record();
      while (next_eval <= consumed) next_eval += cfg.eval_every;
    }
  }
  if (cfg.whiten) whitener.fold(model);
  result.model = std::move(model);
  return result;
}

/// Largest relative difference between the analytic gradient and central
/// finite differences over `n_probes` randomly chosen parameters. The
/// relative error uses max(|analytic|, |numeric|, floor) as denominator.
inline double gradient_check(const AnnModel& model, const TrainingSet& set, int n_probes,
                             std::uint64_t seed = 7, double step = 1e-5, double floor = 1e-8) {
  if (n_probes < 1) throw UsageError("gradient_check: n_probes must be >= 1");
  std::vector<std::size_t> rows(set.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> grad;
  loss_and_gradient(model, set, rows, &grad);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, model.total_parameter_count() - 1);
  AnnModel probe = model;
  double worst = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    const std::size_t k = pick(rng);
    const double orig = probe.params()[k];
    probe.params()[k] = orig + step;
    const double lp = loss_and_gradient(probe, set, rows, nullptr);
    probe.params()[k] = orig - step;
    const double lm = loss_and_gradient(probe, set, rows, nullptr);
    probe.params()[k] = orig;
    const double numeric = (lp - lm) / (2.0 * step);
    const double denom = std::max({std::abs(grad[k]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(grad[k] - numeric) / denom);
  }
  return worst;
}

struct CorrectedStream {
  std::vector<double> values;         // fractional codes
  std::vector<std::uint8_t> corrected;  // 0 for leading samples without history
};

/// Applies any estimator f(features) -> normalized error to every sample with
/// full history; earlier samples pass through unchanged.
template <typename Estimator>
CorrectedStream correct_stream_with(std::span<const int> codes, const FeatureSpec& spec,
                                    Estimator&& estimate) {
  const int bits = spec.resolution_bits;
  const auto x = normalize_codes(codes, bits);
  CorrectedStream out;
  out.values.resize(codes.size());
  out.corrected.assign(codes.size(), 0);
  std::vector<double> f(static_cast<std::size_t>(spec.m));
  for (std::size_t k = 0; k < codes.size(); ++k) {
    if (write_features(x, k, spec, f)) {
      out.values[k] = denormalize_code(x[k] + estimate(std::span<const double>(f)), bits);
      out.corrected[k] = 1;
    } else {
      out.values[k] = static_cast<double>(codes[k]);
    }
  }
  return out;
}

inline CorrectedStream correct_stream(const AnnModel& model, std::span<const int> codes,
                                      const FeatureSpec& spec) {
  if (model.inputs() != spec.m) throw UsageError("correct_stream: model m != feature m");
  std::vector<double> act(static_cast<std::size_t>(model.hidden()));
  return correct_stream_with(codes, spec, [&](std::span<const double> f) {
    return detail::forward(model, f, act);
  });
}

// ---------------------------------------------------------------------------
// Fixed-point inference.
//
// Every tensor is stored as signed integers of `bits` bits (sign included)
// times a power-of-two scale 2^exponent. Features are 12-bit codes already and
// enter exactly. Pre-activations accumulate in double (a wide accumulator),
// tanh comes from a 1024-entry table on [-8, 8] with linear interpolation, and
// each activation is rounded to `bits`-bit fixed point on [-1, 1].
//
// Per-sample deviation from the float model is bounded by
//   sum_j |w2_j| (e_tab + e_act + |tanh'(z_j)| dz_j) + sum_j |a_j| d_w2 + d_b2
//   dz_j = sum_i |x_i| d_w1 + d_b1
// with d_t = step_t / 2 the rounding error of tensor t, e_act = 2^-(bits-1)
// (one step, the top code is clamped) and e_tab the table error (<= 3e-5). predict_q_bound() evaluates it.

inline constexpr std::size_t kTanhTableSize = 1024;
inline constexpr double kTanhTableRange = 8.0;

struct QuantizedTensor {
  std::string name;
  int exponent = 0;  // value = code * 2^exponent
  std::vector<std::int32_t> codes;

  double step() const { return std::ldexp(1.0, exponent); }
  double value(std::size_t i) const { return static_cast<double>(codes[i]) * step(); }
};

struct QuantizedModel {
  int bits = 12;
  int h = 0;
  int m = 0;
  QuantizedTensor w1, b1, w2, b2;
  std::vector<double> tanh_table;  // kTanhTableSize samples on [-range, range]
};

inline std::vector<double> make_tanh_table() {
  std::vector<double> t(kTanhTableSize);
  const double dx = 2.0 * kTanhTableRange / static_cast<double>(kTanhTableSize - 1);
  for (std::size_t i = 0; i < kTanhTableSize; ++i)
    t[i] = std::tanh(-kTanhTableRange + dx * static_cast<double>(i));
  return t;
}

inline double table_tanh(const std::vector<double>& table, double z) {
  if (z <= -kTanhTableRange) return table.front();
  if (z >= kTanhTableRange) return table.back();
  const double pos = (z + kTanhTableRange) / (2.0 * kTanhTableRange) *
                     static_cast<double>(table.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), table.size() - 2);
  const double f = pos - static_cast<double>(i);
  return table[i] + f * (table[i + 1] - table[i]);
}

/// Rounds onto `bits`-bit fixed point on [-1, 1].
inline double round_unit(double v, int bits) {
  const double q = std::ldexp(1.0, bits - 1);
  return std::clamp(std::round(v * q), -q, q - 1.0) / q;
}

namespace detail {

/// Smallest exponent e with max|v| <= (2^(bits-1) - 1) * 2^e.
inline int fit_exponent(std::span<const double> v, int bits) {
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) return -(bits - 1);
  const double top = std::ldexp(1.0, bits - 1) - 1.0;
  int e = static_cast<int>(std::ceil(std::log2(peak / top)));
  while (peak > top * std::ldexp(1.0, e)) ++e;
  while (peak <= top * std::ldexp(1.0, e - 1)) --e;
  return e;
}

inline QuantizedTensor quantize_tensor(std::string name, std::span<const double> v, int bits,
                                       std::optional<int> exponent) {
  for (double x : v)
    if (!std::isfinite(x)) throw QuantizationError(name, "non-finite value in " + name);
  QuantizedTensor t;
  t.name = std::move(name);
  t.exponent = exponent ? *exponent : fit_exponent(v, bits);
  const double top = std::ldexp(1.0, bits - 1) - 1.0;
  const double step = t.step();
  t.codes.reserve(v.size());
  for (double x : v) {
    const double c = std::round(x / step);
    if (std::abs(c) > top)
      throw QuantizationError(t.name, "value " + std::to_string(x) + " overflows " +
                                          std::to_string(bits) + "-bit range of " + t.name);
    t.codes.push_back(static_cast<std::int32_t>(c));
  }
  return t;
}

}  // namespace detail

/// Fixed exponents per tensor (w1, b1, w2, b2); empty means fitted to the data.
struct QuantizeOptions {
  std::optional<int> w1_exponent, b1_exponent, w2_exponent, b2_exponent;
};

inline QuantizedModel quantize(const AnnModel& model, int bits = 12,
                               const QuantizeOptions& opt = {}) {
  if (bits < 4 || bits > 16) throw UsageError("quantize: bits must be in [4, 16]");
  QuantizedModel q;
  q.bits = bits;
  q.h = model.hidden();
  q.m = model.inputs();
  q.w1 = detail::quantize_tensor("w1", model.w1(), bits, opt.w1_exponent);
  q.b1 = detail::quantize_tensor("b1", model.b1(), bits, opt.b1_exponent);
  q.w2 = detail::quantize_tensor("w2", model.w2(), bits, opt.w2_exponent);
  const double b2 = model.b2();
  q.b2 = detail::quantize_tensor("b2", std::span<const double>(&b2, 1), bits, opt.b2_exponent);
  q.tanh_table = make_tanh_table();
  return q;
}

inline AnnModel dequantize(const QuantizedModel& q) {
  AnnModel model(q.h, q.m);
  auto w1 = model.w1();
  for (std::size_t i = 0; i < w1.size(); ++i) w1[i] = q.w1.value(i);
  auto b1 = model.b1();
  for (std::size_t i = 0; i < b1.size(); ++i) b1[i] = q.b1.value(i);
  auto w2 = model.w2();
  for (std::size_t i = 0; i < w2.size(); ++i) w2[i] = q.w2.value(i);
  model.b2() = q.b2.value(0);
  return model;
}

inline double predict_q(const QuantizedModel& q, std::span<const double> features) {
  const auto m = static_cast<std::size_t>(q.m);
  if (features.size() != m)
    throw UsageError("predict_q: feature length " + std::to_string(features.size()) +
                     " != m = " + std::to_string(q.m));
  const double s1 = q.w1.step(), sb1 = q.b1.step(), s2 = q.w2.step();
  double y = 0.0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(q.h); ++j) {
    const std::int32_t* row = q.w1.codes.data() + j * m;
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(row[i]) * features[i];
    const double z = acc * s1 + static_cast<double>(q.b1.codes[j]) * sb1;
    const double a = round_unit(table_tanh(q.tanh_table, z), q.bits);
    y += static_cast<double>(q.w2.codes[j]) * a;
  }
  return y * s2 + q.b2.value(0);
}

/// Worst-case |predict_q - predict| for one feature vector (see above).
inline double predict_q_bound(const QuantizedModel& q, const AnnModel& model,
                              std::span<const double> features) {
  const auto m = static_cast<std::size_t>(q.m);
  double sum_x = 0.0;
  for (double x : features) sum_x += std::abs(x);
  const double dz = sum_x * q.w1.step() / 2 + q.b1.step() / 2;
  const double e_act = std::ldexp(1.0, -(q.bits - 1));
  const double e_tab = 3e-5;
  const auto w1 = model.w1();
  const auto b1 = model.b1();
  const auto w2 = model.w2();
  double bound = q.b2.step() / 2;
  for (std::size_t j = 0; j < static_cast<std::size_t>(q.h); ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < m; ++i) z += w1[j * m + i] * features[i];
    // tanh' is largest at the point of the interval closest to zero
    const double zmin = std::max(0.0, std::abs(z) - dz);
    const double slope = 1.0 - std::tanh(zmin) * std::tanh(zmin);
    bound += (std::abs(w2[j]) + q.w2.step() / 2) * (e_tab + e_act + slope * dz);
    bound += (std::abs(std::tanh(z)) + e_tab + e_act + slope * dz) * q.w2.step() / 2;
  }
  return bound;
}

inline CorrectedStream correct_stream_q(const QuantizedModel& q, std::span<const int> codes,
                                        const FeatureSpec& spec) {
  if (q.m != spec.m) throw UsageError("correct_stream_q: model m != feature m");
  return correct_stream_with(codes, spec,
                             [&](std::span<const double> f) { return predict_q(q, f); });
}

}  // namespace sarcal

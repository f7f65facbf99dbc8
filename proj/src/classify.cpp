#include "tiersim/classify.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include "rng.hpp"
#include "text_util.hpp"
#include "tiersim/errors.hpp"

namespace tiersim {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimError(std::string(what) + ": expected " + std::to_string(want) + " values, got " +
                   std::to_string(got));
  }
}

struct Activations {
  std::vector<double> hidden;
  std::vector<double> output;
};

Activations forward_full(const MlpModel& m, std::span<const double> x) {
  check_dim(x.size(), m.n_in, "mlp input");
  Activations a;
  a.hidden.resize(m.n_hidden);
  for (std::size_t j = 0; j < m.n_hidden; ++j) {
    double s = m.b1[j];
    const double* row = &m.w1[j * m.n_in];
    for (std::size_t i = 0; i < m.n_in; ++i) s += row[i] * x[i];
    a.hidden[j] = sigmoid(s);
  }
  a.output.resize(m.n_out);
  for (std::size_t k = 0; k < m.n_out; ++k) {
    double s = m.b2[k];
    const double* row = &m.w2[k * m.n_hidden];
    for (std::size_t j = 0; j < m.n_hidden; ++j) s += row[j] * a.hidden[j];
    a.output[k] = sigmoid(s);
  }
  return a;
}

void axpy(std::vector<double>& y, double alpha, const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void apply_gradient(MlpModel& m, const MlpModel& g, double alpha) {
  axpy(m.w1, alpha, g.w1);
  axpy(m.b1, alpha, g.b1);
  axpy(m.w2, alpha, g.w2);
  axpy(m.b2, alpha, g.b2);
}

void require_target(int t, OutputKind kind) {
  const bool ok = kind == OutputKind::kHeaviside ? (t == 0 || t == 1) : (t == -1 || t == 1);
  if (!ok) throw DataError("target " + std::to_string(t) + " outside the model's output set");
}

}  // namespace

void LearnConfig::validate() const {
  if (!(eta > 0.0)) throw DataError("eta must be > 0");
  if (batch < 1) throw DataError("batch must be >= 1");
  if (target_error < 0.0) throw DataError("target_error must be >= 0");
}

LinearOutput linear_forward(const LinearModel& model, std::span<const double> x) {
  if (model.weights.empty()) throw DimError("linear model has no weights");
  check_dim(x.size(), model.weights.size(), "linear input");
  LinearOutput out;
  out.s = model.bias;
  for (std::size_t i = 0; i < x.size(); ++i) out.s += model.weights[i] * x[i];
  const bool positive = out.s >= 0.0;
  if (model.output_kind == OutputKind::kHeaviside) {
    out.y = positive ? 1 : 0;
  } else {
    out.y = positive ? 1 : -1;
  }
  return out;
}

LinearModel perceptron_update(const LinearModel& model, std::span<const double> x, int target) {
  if (model.output_kind != OutputKind::kHeaviside) throw DataError("perceptron update needs a Heaviside model");
  require_target(target, OutputKind::kHeaviside);
  const int delta = target - linear_forward(model, x).y;
  LinearModel next = model;
  if (delta == 0) return next;
  for (std::size_t i = 0; i < x.size(); ++i) next.weights[i] += delta * x[i];
  next.bias += delta;
  return next;
}

double adaline_error(std::span<const Pattern> dataset, const LinearModel& model) {
  if (dataset.empty()) throw DataError("empty dataset");
  double sum = 0.0;
  for (const auto& p : dataset) {
    if (p.t != -1.0 && p.t != 1.0) throw DataError("ADALINE targets must be -1 or +1");
    const double r = linear_forward(model, p.x).s - p.t;
    sum += r * r;
  }
  return sum / static_cast<double>(dataset.size());
}

LinearModel lms_update(const LinearModel& model, std::span<const double> x, double target, double eta) {
  if (model.output_kind != OutputKind::kSign) throw DataError("LMS update needs a sign-output model");
  if (!(eta > 0.0)) throw DataError("eta must be > 0");
  const double residual = target - linear_forward(model, x).s;
  LinearModel next = model;
  for (std::size_t i = 0; i < x.size(); ++i) next.weights[i] += eta * residual * x[i];
  next.bias += eta * residual;
  return next;
}

std::size_t count_misclassified(std::span<const Pattern> dataset, const LinearModel& model) {
  return static_cast<std::size_t>(std::count_if(dataset.begin(), dataset.end(), [&](const Pattern& p) {
    return linear_forward(model, p.x).y != static_cast<int>(p.t);
  }));
}

TrainStats train_perceptron(LinearModel& model, std::span<const Pattern> dataset, const LearnConfig& config) {
  config.validate();
  if (dataset.empty()) throw DataError("empty dataset");
  TrainStats stats;
  const std::size_t n = model.weights.size();
  for (std::uint32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    stats.epochs = epoch;
    std::size_t errors = 0;
    std::vector<double> dw(n, 0.0);
    double db = 0.0;
    std::uint32_t pending = 0;
    for (const auto& p : dataset) {
      const int target = static_cast<int>(p.t);
      require_target(target, OutputKind::kHeaviside);
      const int delta = target - linear_forward(model, p.x).y;
      if (delta != 0) ++errors;
      for (std::size_t i = 0; i < n; ++i) dw[i] += delta * p.x[i];
      db += delta;
      if (++pending == config.batch) {
        for (std::size_t i = 0; i < n; ++i) model.weights[i] += dw[i];
        model.bias += db;
        std::fill(dw.begin(), dw.end(), 0.0);
        db = 0.0;
        pending = 0;
      }
    }
    if (pending > 0) {
      for (std::size_t i = 0; i < n; ++i) model.weights[i] += dw[i];
      model.bias += db;
    }
    stats.final_error = static_cast<double>(errors);
    if (errors == 0) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

TrainStats train_adaline(LinearModel& model, std::span<const Pattern> dataset, const LearnConfig& config) {
  config.validate();
  if (model.output_kind != OutputKind::kSign) throw DataError("ADALINE needs a sign-output model");
  TrainStats stats;
  stats.final_error = adaline_error(dataset, model);
  const std::size_t n = model.weights.size();
  for (std::uint32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    stats.epochs = epoch;
    std::vector<double> dw(n, 0.0);
    double db = 0.0;
    std::uint32_t pending = 0;
    auto flush = [&] {
      for (std::size_t i = 0; i < n; ++i) model.weights[i] += dw[i];
      model.bias += db;
      std::fill(dw.begin(), dw.end(), 0.0);
      db = 0.0;
      pending = 0;
    };
    for (const auto& p : dataset) {
      const double residual = p.t - linear_forward(model, p.x).s;
      for (std::size_t i = 0; i < n; ++i) dw[i] += config.eta * residual * p.x[i];
      db += config.eta * residual;
      if (++pending == config.batch) flush();
    }
    if (pending > 0) flush();
    stats.final_error = adaline_error(dataset, model);
    if (stats.final_error <= config.target_error) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

void MlpModel::validate() const {
  if (n_in == 0 || n_hidden == 0 || n_out == 0) throw DimError("mlp layer sizes must be >= 1");
  if (w1.size() != n_hidden * n_in || b1.size() != n_hidden || w2.size() != n_out * n_hidden ||
      b2.size() != n_out) {
    throw DimError("mlp parameter arrays do not match layer sizes");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
  };
  if (!finite(w1) || !finite(b1) || !finite(w2) || !finite(b2)) throw DataError("mlp weights must be finite");
}

MlpModel mlp_zero(std::size_t n_in, std::size_t n_hidden, std::size_t n_out) {
  MlpModel m;
  m.n_in = n_in;
  m.n_hidden = n_hidden;
  m.n_out = n_out;
  m.w1.assign(n_hidden * n_in, 0.0);
  m.b1.assign(n_hidden, 0.0);
  m.w2.assign(n_out * n_hidden, 0.0);
  m.b2.assign(n_out, 0.0);
  m.validate();
  return m;
}

MlpModel mlp_init(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, std::uint64_t seed) {
  MlpModel m = mlp_zero(n_in, n_hidden, n_out);
  detail::Rng rng(seed);
  for (auto* v : {&m.w1, &m.b1, &m.w2, &m.b2}) {
    for (double& w : *v) w = rng.uniform(-0.5, 0.5);
  }
  return m;
}

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> x) {
  return forward_full(model, x).output;
}

double mlp_error(const MlpModel& model, std::span<const double> x, std::span<const double> t) {
  check_dim(t.size(), model.n_out, "mlp target");
  const auto y = mlp_forward(model, x);
  double e = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) e += (y[k] - t[k]) * (y[k] - t[k]);
  return e;
}

MlpModel mlp_gradient(const MlpModel& model, std::span<const double> x, std::span<const double> t) {
  check_dim(t.size(), model.n_out, "mlp target");
  const Activations a = forward_full(model, x);
  MlpModel g = mlp_zero(model.n_in, model.n_hidden, model.n_out);

  std::vector<double> delta_out(model.n_out);
  for (std::size_t k = 0; k < model.n_out; ++k) {
    const double y = a.output[k];
    delta_out[k] = 2.0 * (y - t[k]) * y * (1.0 - y);
    g.b2[k] = delta_out[k];
    for (std::size_t j = 0; j < model.n_hidden; ++j) g.w2[k * model.n_hidden + j] = delta_out[k] * a.hidden[j];
  }
  for (std::size_t j = 0; j < model.n_hidden; ++j) {
    double back = 0.0;
    for (std::size_t k = 0; k < model.n_out; ++k) back += delta_out[k] * model.w2[k * model.n_hidden + j];
    const double h = a.hidden[j];
    const double delta_hidden = back * h * (1.0 - h);
    g.b1[j] = delta_hidden;
    for (std::size_t i = 0; i < model.n_in; ++i) g.w1[j * model.n_in + i] = delta_hidden * x[i];
  }
  return g;
}

MlpStep mlp_train_step(const MlpModel& model, std::span<const double> x, std::span<const double> t, double eta) {
  if (eta < 0.0) throw DataError("eta must be >= 0");
  MlpStep step{model, mlp_error(model, x, t)};
  if (eta > 0.0) apply_gradient(step.model, mlp_gradient(model, x, t), -eta);
  return step;
}

double mlp_mse(const MlpModel& model, std::span<const MlpPattern> dataset) {
  if (dataset.empty()) throw DataError("empty dataset");
  double sum = 0.0;
  for (const auto& p : dataset) sum += mlp_error(model, p.x, p.t);
  return sum / static_cast<double>(dataset.size() * model.n_out);
}

TrainStats train_mlp(MlpModel& model, std::span<const MlpPattern> dataset, const LearnConfig& config) {
  config.validate();
  model.validate();
  TrainStats stats;
  stats.final_error = mlp_mse(model, dataset);
  MlpModel acc = mlp_zero(model.n_in, model.n_hidden, model.n_out);
  for (std::uint32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    stats.epochs = epoch;
    std::uint32_t pending = 0;
    for (const auto& p : dataset) {
      if (config.batch == 1) {
        apply_gradient(model, mlp_gradient(model, p.x, p.t), -config.eta);
        continue;
      }
      apply_gradient(acc, mlp_gradient(model, p.x, p.t), 1.0);
      if (++pending == config.batch) {
        apply_gradient(model, acc, -config.eta);
        acc = mlp_zero(model.n_in, model.n_hidden, model.n_out);
        pending = 0;
      }
    }
    if (pending > 0) {
      apply_gradient(model, acc, -config.eta);
      acc = mlp_zero(model.n_in, model.n_hidden, model.n_out);
    }
    stats.final_error = mlp_mse(model, dataset);
    if (stats.final_error <= config.target_error) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DimError("argmax of empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void WindowSpec::validate() const {
  if (width < 1) throw DataError("window width must be >= 1");
  if (stride < 1) throw DataError("window stride must be >= 1");
}

Activity majority_label(std::span<const AccelSample> samples) {
  std::array<std::size_t, 3> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] >= counts[best]) best = c;
  }
  return static_cast<Activity>(best);
}

std::vector<double> window_features(std::span<const AccelSample> samples, WindowFeature feature) {
  std::vector<double> x;
  if (feature == WindowFeature::kRawAxes) {
    x.reserve(3 * samples.size());
    for (const auto& s : samples) {
      x.push_back(s.ax);
      x.push_back(s.ay);
      x.push_back(s.az);
    }
  } else {
    x.reserve(samples.size());
    for (const auto& s : samples) x.push_back(magnitude_sq(s));
  }
  return x;
}

std::vector<Window> windows(const Trace& trace, const WindowSpec& spec) {
  spec.validate();
  const auto& v = trace.samples;
  if (v.size() < spec.width) {
    throw DataError("trace of " + std::to_string(v.size()) + " samples is shorter than window width " +
                    std::to_string(spec.width));
  }
  const std::size_t count = (v.size() - spec.width) / spec.stride + 1;
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t first = w * spec.stride;
    std::span<const AccelSample> slice(v.data() + first, spec.width);
    out.push_back({first, window_features(slice, spec.feature), majority_label(slice)});
  }
  return out;
}

Activity WindowDetector::classify(std::span<const double> x) const {
  return static_cast<Activity>(argmax(mlp_forward(model, x)));
}

DetectorTraining default_detector_training() {
  DetectorTraining t;
  t.trace_spec.duration_min = 30.0;
  t.trace_spec.activity_fraction = 0.3;
  t.trace_spec.fall_count = 100;
  t.trace_seed = 7;
  t.window = WindowSpec{3, 3, WindowFeature::kMagnitudeSq};
  t.hidden = 6;
  t.learn.eta = 0.05;
  t.learn.max_epochs = 200;
  t.learn.target_error = 0.0;
  t.learn.seed = 11;
  t.fall_oversample = 20;
  return t;
}

WindowDetector train_detector(const DetectorTraining& training) {
  const Trace trace = generate_trace(training.trace_spec, training.trace_seed);
  std::vector<MlpPattern> data;
  for (const auto& w : windows(trace, training.window)) {
    std::vector<double> target(3, 0.0);
    target[static_cast<std::size_t>(w.label)] = 1.0;
    const std::uint32_t copies = w.label == Activity::kFall ? training.fall_oversample : 1;
    for (std::uint32_t c = 0; c < copies; ++c) data.push_back({w.x, target});
  }
  detail::Rng rng(training.learn.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = data.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
    std::swap(data[i - 1], data[std::min(j, i - 1)]);
  }

  WindowDetector detector;
  detector.window = training.window;
  detector.model = mlp_init(training.window.input_size(), training.hidden, 3, training.learn.seed);
  train_mlp(detector.model, data, training.learn);
  return detector;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "tiersim-model";
constexpr std::string_view kVersion = "v1";

void append_values(std::string& out, std::string_view name, const std::vector<double>& v) {
  out.append(name);
  for (double d : v) out.append(" ").append(detail::exact(d));
  out.push_back('\n');
}

class Tokens {
 public:
  explicit Tokens(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j > i) tokens_.push_back(text.substr(i, j - i));
      i = j;
    }
  }

  std::string_view next() {
    if (pos_ >= tokens_.size()) throw FormatError("model file truncated");
    return tokens_[pos_++];
  }
  void expect(std::string_view word) {
    auto got = next();
    if (got != word) throw FormatError("model file: expected '" + std::string(word) + "', got '" + std::string(got) + "'");
  }
  template <typename T>
  T number() {
    T v{};
    auto tok = next();
    if (!detail::parse_number(tok, v)) throw FormatError("model file: bad number '" + std::string(tok) + "'");
    return v;
  }
  void read_into(std::vector<double>& v) {
    for (double& d : v) d = number<double>();
  }
  bool done() const { return pos_ == tokens_.size(); }

 private:
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
};

void expect_preamble(Tokens& tok, std::string_view kind) {
  tok.expect(kMagic);
  tok.expect(kVersion);
  tok.expect("kind");
  tok.expect(kind);
}

}  // namespace

std::string format_model(const LinearModel& model) {
  std::string out;
  out.append(kMagic).append(" ").append(kVersion).append("\n");
  out.append("kind linear\n");
  out.append("dims ").append(std::to_string(model.weights.size())).append("\n");
  out.append("output_kind ").append(model.output_kind == OutputKind::kHeaviside ? "heaviside" : "sign").append("\n");
  append_values(out, "weights", model.weights);
  out.append("bias ").append(detail::exact(model.bias)).append("\n");
  return out;
}

std::string format_model(const WindowDetector& detector) {
  const MlpModel& m = detector.model;
  std::string out;
  out.append(kMagic).append(" ").append(kVersion).append("\n");
  out.append("kind mlp\n");
  out.append("dims " + std::to_string(m.n_in) + " " + std::to_string(m.n_hidden) + " " + std::to_string(m.n_out) + "\n");
  out.append("output_kind sigmoid\n");
  out.append("window " + std::to_string(detector.window.width) + " " + std::to_string(detector.window.stride) + " " +
             (detector.window.feature == WindowFeature::kRawAxes ? "raw_axes" : "magnitude_sq") + "\n");
  append_values(out, "w1", m.w1);
  append_values(out, "b1", m.b1);
  append_values(out, "w2", m.w2);
  append_values(out, "b2", m.b2);
  return out;
}

LinearModel parse_linear_model(std::string_view text) {
  Tokens tok(text);
  expect_preamble(tok, "linear");
  tok.expect("dims");
  const auto n = tok.number<std::size_t>();
  if (n < 1) throw FormatError("model file: dims must be >= 1");
  LinearModel m;
  tok.expect("output_kind");
  const auto kind = tok.next();
  if (kind == "heaviside") {
    m.output_kind = OutputKind::kHeaviside;
  } else if (kind == "sign") {
    m.output_kind = OutputKind::kSign;
  } else {
    throw FormatError("model file: unknown output_kind '" + std::string(kind) + "'");
  }
  tok.expect("weights");
  m.weights.resize(n);
  tok.read_into(m.weights);
  tok.expect("bias");
  m.bias = tok.number<double>();
  if (!tok.done()) throw FormatError("model file: trailing data");
  return m;
}

WindowDetector parse_detector(std::string_view text) {
  Tokens tok(text);
  expect_preamble(tok, "mlp");
  tok.expect("dims");
  WindowDetector d;
  MlpModel& m = d.model;
  m.n_in = tok.number<std::size_t>();
  m.n_hidden = tok.number<std::size_t>();
  m.n_out = tok.number<std::size_t>();
  if (m.n_in == 0 || m.n_hidden == 0 || m.n_out == 0 || m.n_in > 100000 || m.n_hidden > 100000 || m.n_out > 100000) {
    throw FormatError("model file: bad dims");
  }
  tok.expect("output_kind");
  tok.expect("sigmoid");
  tok.expect("window");
  d.window.width = tok.number<std::size_t>();
  d.window.stride = tok.number<std::size_t>();
  const auto feature = tok.next();
  if (feature == "magnitude_sq") {
    d.window.feature = WindowFeature::kMagnitudeSq;
  } else if (feature == "raw_axes") {
    d.window.feature = WindowFeature::kRawAxes;
  } else {
    throw FormatError("model file: unknown window feature '" + std::string(feature) + "'");
  }
  m.w1.resize(m.n_hidden * m.n_in);
  m.b1.resize(m.n_hidden);
  m.w2.resize(m.n_out * m.n_hidden);
  m.b2.resize(m.n_out);
  tok.expect("w1");
  tok.read_into(m.w1);
  tok.expect("b1");
  tok.read_into(m.b1);
  tok.expect("w2");
  tok.read_into(m.w2);
  tok.expect("b2");
  tok.read_into(m.b2);
  if (!tok.done()) throw FormatError("model file: trailing data");
  m.validate();
  d.window.validate();
  if (d.window.input_size() != m.n_in) throw FormatError("model file: window size does not match input layer");
  if (m.n_out != 3) throw FormatError("model file: detector needs 3 outputs (REST, WALK, FALL)");
  return d;
}

void save_model(const WindowDetector& detector, const std::filesystem::path& path) {
  detail::write_file(path, format_model(detector));
}

WindowDetector load_detector(const std::filesystem::path& path) {
  return parse_detector(detail::read_file(path));
}

}  // namespace tiersim

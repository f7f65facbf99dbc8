#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tiersim/trace.hpp"

namespace tiersim {

// ---------------------------------------------------------------------------
// Single-layer models: Heaviside perceptron and ADALINE.
// ---------------------------------------------------------------------------

enum class OutputKind : std::uint8_t {
  kHeaviside,  // {0, 1}
  kSign,       // {-1, +1}
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  OutputKind output_kind = OutputKind::kHeaviside;

  bool operator==(const LinearModel&) const = default;
};

struct LinearOutput {
  int y = 0;       // class output
  double s = 0.0;  // pre-activation
};

struct Pattern {
  std::vector<double> x;
  double t = 0.0;
};

struct LearnConfig {
  double eta = 0.1;
  std::uint32_t batch = 1;  // patterns accumulated per update
  std::uint32_t max_epochs = 1000;
  double target_error = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainStats {
  std::uint32_t epochs = 0;  // epochs actually run
  double final_error = 0.0;  // misclassifications (perceptron) or Q / MSE
  bool converged = false;
};

LinearOutput linear_forward(const LinearModel& model, std::span<const double> x);

// s >= 0 maps to the positive class for both output kinds.
LinearModel perceptron_update(const LinearModel& model, std::span<const double> x, int target);

// Mean squared residual of the linear pre-activation against +-1 targets.
double adaline_error(std::span<const Pattern> dataset, const LinearModel& model);

LinearModel lms_update(const LinearModel& model, std::span<const double> x, double target, double eta);

std::size_t count_misclassified(std::span<const Pattern> dataset, const LinearModel& model);

/// Epoch loop of perceptron_update; stops at the first error-free epoch.
/// With batch > 1, corrections are summed over `batch` patterns before they
/// are applied.
TrainStats train_perceptron(LinearModel& model, std::span<const Pattern> dataset,
                            const LearnConfig& config);

/// Epoch loop of lms_update; stops once Q <= target_error.
TrainStats train_adaline(LinearModel& model, std::span<const Pattern> dataset,
                         const LearnConfig& config);

// ---------------------------------------------------------------------------
// Three-layer backpropagation network.
// ---------------------------------------------------------------------------

/// Sigmoid hidden and output layers. Weight matrices are row-major: w1 is
/// hidden x input, w2 is output x hidden.
struct MlpModel {
  std::size_t n_in = 0;
  std::size_t n_hidden = 0;
  std::size_t n_out = 0;
  std::vector<double> w1, b1, w2, b2;

  void validate() const;
  bool operator==(const MlpModel&) const = default;
};

struct MlpPattern {
  std::vector<double> x;
  std::vector<double> t;
};

MlpModel mlp_zero(std::size_t n_in, std::size_t n_hidden, std::size_t n_out);
// Weights and biases uniform in [-0.5, 0.5].
MlpModel mlp_init(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, std::uint64_t seed);

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> x);

// Squared error sum_k (y_k - t_k)^2 of one pattern.
double mlp_error(const MlpModel& model, std::span<const double> x, std::span<const double> t);

/// Gradient of mlp_error with respect to every parameter, in MlpModel layout.
MlpModel mlp_gradient(const MlpModel& model, std::span<const double> x, std::span<const double> t);

struct MlpStep {
  MlpModel model;
  double error = 0.0;  // error before the step
};
MlpStep mlp_train_step(const MlpModel& model, std::span<const double> x, std::span<const double> t,
                       double eta);

double mlp_mse(const MlpModel& model, std::span<const MlpPattern> dataset);

/// Per-pattern gradient descent (batch = 1) or accumulated updates over
/// `batch` patterns; stops when the mean squared error <= target_error.
TrainStats train_mlp(MlpModel& model, std::span<const MlpPattern> dataset, const LearnConfig& config);

std::size_t argmax(std::span<const double> v);

// ---------------------------------------------------------------------------
// Windowing of traces into input vectors.
// ---------------------------------------------------------------------------

enum class WindowFeature : std::uint8_t {
  kMagnitudeSq,  // W values
  kRawAxes,      // 3W values, ax ay az per sample
};

struct WindowSpec {
  std::size_t width = 3;
  std::size_t stride = 3;
  WindowFeature feature = WindowFeature::kMagnitudeSq;

  void validate() const;
  std::size_t input_size() const { return feature == WindowFeature::kRawAxes ? 3 * width : width; }
};

struct Window {
  std::size_t first = 0;  // index of the first sample
  std::vector<double> x;
  Activity label = Activity::kRest;
};

// Majority label; ties go to the more severe class, so FALL wins any tie.
Activity majority_label(std::span<const AccelSample> samples);

std::vector<double> window_features(std::span<const AccelSample> samples, WindowFeature feature);

std::vector<Window> windows(const Trace& trace, const WindowSpec& spec);

/// A trained network bound to the windowing it was trained with. Class
/// indices follow Activity: 0 REST, 1 WALK, 2 FALL.
struct WindowDetector {
  WindowSpec window;
  MlpModel model;

  Activity classify(std::span<const double> x) const;
};

struct DetectorTraining {
  TraceSpec trace_spec;
  std::uint64_t trace_seed = 7;
  WindowSpec window;
  std::size_t hidden = 6;
  LearnConfig learn;
  std::uint32_t fall_oversample = 20;
};

/// Offline training on a generated trace.
DetectorTraining default_detector_training();
WindowDetector train_detector(const DetectorTraining& training);

// ---------------------------------------------------------------------------
// Model files: text header, then whitespace-separated parameters written
// with 17 significant digits.
// ---------------------------------------------------------------------------

std::string format_model(const LinearModel& model);
std::string format_model(const WindowDetector& detector);
LinearModel parse_linear_model(std::string_view text);
WindowDetector parse_detector(std::string_view text);

void save_model(const WindowDetector& detector, const std::filesystem::path& path);
WindowDetector load_detector(const std::filesystem::path& path);

}  // namespace tiersim

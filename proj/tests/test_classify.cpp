#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "tiersim/classify.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/node.hpp"

using namespace tiersim;

namespace {

// Seed and epoch count of the recorded XOR training run.
constexpr std::uint64_t kXorSeed = 1;
constexpr std::uint32_t kXorEpochs = 2785;

const std::vector<std::vector<double>> kCorners = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};

std::vector<Pattern> truth_table(std::array<double, 4> t) {
  std::vector<Pattern> out;
  for (std::size_t i = 0; i < 4; ++i) out.push_back({kCorners[i], t[i]});
  return out;
}

LinearModel zero_perceptron(std::size_t n) { return {std::vector<double>(n, 0.0), 0.0, OutputKind::kHeaviside}; }

std::vector<MlpPattern> xor_patterns() {
  return {{{0, 0}, {0}}, {{0, 1}, {1}}, {{1, 0}, {1}}, {{1, 1}, {0}}};
}

// Relative error with an absolute floor so near-zero gradients compare sanely.
double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::max(std::abs(a), std::abs(b))); }

std::vector<double*> params(MlpModel& m) {
  std::vector<double*> out;
  for (auto* v : {&m.w1, &m.b1, &m.w2, &m.b2}) {
    for (double& d : *v) out.push_back(&d);
  }
  return out;
}

}  // namespace

TEST_CASE("linear forward") {
  const LinearModel m{{1, 1}, -1.5, OutputKind::kHeaviside};
  const auto out = linear_forward(m, std::vector<double>{1, 1});
  CHECK(out.s == 0.5);
  CHECK(out.y == 1);

  const auto edge = linear_forward(zero_perceptron(2), std::vector<double>{1, 0});
  CHECK(edge.s == 0.0);
  CHECK(edge.y == 1);

  const LinearModel sign{{1}, -0.2, OutputKind::kSign};
  CHECK(linear_forward(sign, std::vector<double>{0}).y == -1);

  CHECK_THROWS_AS(linear_forward(m, std::vector<double>{1}), DimError);
}

TEST_CASE("perceptron update") {
  const auto next = perceptron_update(zero_perceptron(2), std::vector<double>{1, 0}, 0);
  CHECK(next.weights == std::vector<double>{-1, 0});
  CHECK(next.bias == -1);

  const LinearModel m{{1, 1}, -1.5, OutputKind::kHeaviside};
  CHECK(perceptron_update(m, std::vector<double>{1, 1}, 1) == m);
  CHECK_THROWS_AS(perceptron_update(m, std::vector<double>{1, 1}, 2), DataError);
}

TEST_CASE("perceptron learns AND and OR but not XOR") {
  LearnConfig cfg;
  cfg.max_epochs = 1000;

  LinearModel and_model = zero_perceptron(2);
  const auto a = train_perceptron(and_model, truth_table({0, 0, 0, 1}), cfg);
  CHECK(a.converged);
  CHECK(a.epochs == 6);
  CHECK(and_model.weights == std::vector<double>{2, 1});
  CHECK(and_model.bias == -3);

  LinearModel or_model = zero_perceptron(2);
  const auto o = train_perceptron(or_model, truth_table({0, 1, 1, 1}), cfg);
  CHECK(o.converged);
  CHECK(o.epochs == 4);
  CHECK(or_model.weights == std::vector<double>{1, 1});
  CHECK(or_model.bias == -1);

  LinearModel xor_model = zero_perceptron(2);
  const auto x = train_perceptron(xor_model, truth_table({0, 1, 1, 0}), cfg);
  CHECK_FALSE(x.converged);
  CHECK(x.epochs == 1000);
  CHECK(x.final_error > 0);
}

TEST_CASE("perceptron converges on random separable sets") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const double a = u(rng), b = u(rng), c = 0.3 * u(rng);
    const double norm = std::hypot(a, b);
    std::vector<Pattern> data;
    while (data.size() < 40) {
      std::vector<double> x{u(rng), u(rng)};
      const double margin = (a * x[0] + b * x[1] + c) / norm;
      if (std::abs(margin) < 0.1) continue;
      data.push_back({x, margin > 0 ? 1.0 : 0.0});
    }
    LinearModel m = zero_perceptron(2);
    LearnConfig cfg;
    cfg.batch = trial % 3 == 0 ? 4 : 1;
    const auto stats = train_perceptron(m, data, cfg);
    CHECK(stats.converged);
    CHECK(count_misclassified(data, m) == 0);
  }
}

TEST_CASE("ADALINE error") {
  const LinearModel one{{0}, 1.0, OutputKind::kSign};
  CHECK(adaline_error(std::vector<Pattern>{{{0}, -1}}, one) == 4.0);
  CHECK(adaline_error(std::vector<Pattern>{{{0}, 1}}, one) == 0.0);

  // Residuals 1 and 3.
  const LinearModel ident{{1}, 0.0, OutputKind::kSign};
  CHECK(adaline_error(std::vector<Pattern>{{{0}, 1}, {{-2}, 1}}, ident) == 5.0);

  CHECK_THROWS_AS(adaline_error(std::vector<Pattern>{}, ident), DataError);
  CHECK_THROWS_AS(adaline_error(std::vector<Pattern>{{{0}, 0.5}}, ident), DataError);
}

TEST_CASE("LMS update") {
  const LinearModel m{{0.5}, 0.0, OutputKind::kSign};
  const auto next = lms_update(m, std::vector<double>{1}, 1.0, 0.1);
  CHECK(next.weights[0] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(next.bias == doctest::Approx(0.05).epsilon(1e-15));

  const LinearModel exact{{0.5}, 0.5, OutputKind::kSign};
  CHECK(lms_update(exact, std::vector<double>{1}, 1.0, 0.1) == exact);
  CHECK_THROWS_AS(lms_update(m, std::vector<double>{1}, 1.0, 0.0), DataError);
  CHECK_THROWS_AS(lms_update(zero_perceptron(1), std::vector<double>{1}, 1.0, 0.1), DataError);
}

TEST_CASE("an LMS epoch lowers Q on a fixed separable set") {
  std::vector<Pattern> data;
  for (int i = 0; i < 20; ++i) {
    const double x0 = -1.0 + 0.1 * i;
    const double x1 = 0.5 * std::sin(i);
    data.push_back({{x0, x1}, x0 + 0.2 * x1 >= 0.05 ? 1.0 : -1.0});
  }
  LinearModel m{{0.0, 0.0}, 0.0, OutputKind::kSign};
  LearnConfig cfg;
  cfg.eta = 0.01;
  cfg.max_epochs = 1;
  for (int epoch = 0; epoch < 50; ++epoch) {
    const double before = adaline_error(data, m);
    train_adaline(m, data, cfg);
    CHECK(adaline_error(data, m) < before);
  }
}

TEST_CASE("Q is non-negative and zero only for zero residuals") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const LinearModel m{{u(rng), u(rng)}, u(rng), OutputKind::kSign};
    std::vector<Pattern> data;
    for (int k = 0; k < 5; ++k) data.push_back({{u(rng), u(rng)}, u(rng) > 0 ? 1.0 : -1.0});
    CHECK(adaline_error(data, m) > 0.0);
  }
}

TEST_CASE("MLP forward") {
  const MlpModel zero = mlp_zero(3, 4, 2);
  for (double y : mlp_forward(zero, std::vector<double>{1, -2, 3})) CHECK(y == 0.5);

  MlpModel tiny = mlp_zero(1, 1, 1);
  tiny.w1 = {1};
  tiny.w2 = {1};
  CHECK(mlp_forward(tiny, std::vector<double>{0})[0] == doctest::Approx(0.6224593312018546).epsilon(1e-15));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const MlpModel m = mlp_init(4, 5, 3, seed);
    for (double y : mlp_forward(m, std::vector<double>{u(rng), u(rng), u(rng), u(rng)})) {
      CHECK(y > 0.0);
      CHECK(y < 1.0);
    }
  }
  CHECK_THROWS_AS(mlp_forward(zero, std::vector<double>{1}), DimError);
}

TEST_CASE("zero step size leaves the model unchanged") {
  const MlpModel m = mlp_init(2, 3, 1, 4);
  const auto step = mlp_train_step(m, std::vector<double>{1, 0}, std::vector<double>{1}, 0.0);
  CHECK(step.model == m);
  CHECK(step.error == doctest::Approx(mlp_error(m, std::vector<double>{1, 0}, std::vector<double>{1})));
  CHECK(step.error > 0.0);
}

TEST_CASE("backprop gradients match central differences") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-5;
  for (std::size_t n_in : {1u, 2u, 5u}) {
    for (std::size_t n_hidden : {1u, 3u, 7u}) {
      for (std::size_t n_out : {1u, 3u}) {
        MlpModel m = mlp_init(n_in, n_hidden, n_out, rng());
        std::vector<double> x(n_in), t(n_out);
        for (double& v : x) v = u(rng);
        for (double& v : t) v = (u(rng) + 1.0) / 2.0;
        MlpModel g = mlp_gradient(m, x, t);
        auto mp = params(m);
        auto gp = params(g);
        double worst = 0.0;
        for (std::size_t i = 0; i < mp.size(); ++i) {
          const double keep = *mp[i];
          *mp[i] = keep + h;
          const double up = mlp_error(m, x, t);
          *mp[i] = keep - h;
          const double down = mlp_error(m, x, t);
          *mp[i] = keep;
          worst = std::max(worst, rel_err(*gp[i], (up - down) / (2 * h)));
        }
        CAPTURE(n_in);
        CAPTURE(n_hidden);
        CAPTURE(n_out);
        CHECK(worst < 1e-4);
      }
    }
  }
}

TEST_CASE("2-2-1 network learns XOR") {
  MlpModel m = mlp_init(2, 2, 1, kXorSeed);
  LearnConfig cfg;
  cfg.eta = 0.5;
  cfg.max_epochs = 20000;
  cfg.target_error = 0.05;
  const auto data = xor_patterns();
  const auto stats = train_mlp(m, data, cfg);
  CHECK(stats.converged);
  CHECK(stats.final_error < 0.05);
  CHECK(stats.epochs == kXorEpochs);
  for (const auto& p : data) CHECK(std::round(mlp_forward(m, p.x)[0]) == p.t[0]);
}

TEST_CASE("training is deterministic for a seed") {
  const auto data = xor_patterns();
  LearnConfig cfg;
  cfg.eta = 0.5;
  cfg.max_epochs = 300;
  MlpModel a = mlp_init(2, 3, 1, 21), b = mlp_init(2, 3, 1, 21);
  train_mlp(a, data, cfg);
  train_mlp(b, data, cfg);
  CHECK(a == b);
  CHECK_FALSE(mlp_init(2, 3, 1, 21) == mlp_init(2, 3, 1, 22));
}

TEST_CASE("batch training accumulates before applying") {
  const auto data = xor_patterns();
  MlpModel m = mlp_init(2, 2, 1, 3);
  MlpModel expected = m;
  MlpModel sum = mlp_zero(2, 2, 1);
  for (const auto& p : data) {
    const MlpModel g = mlp_gradient(m, p.x, p.t);
    auto s = params(sum);
    auto gp = params(const_cast<MlpModel&>(g));
    for (std::size_t i = 0; i < s.size(); ++i) *s[i] += *gp[i];
  }
  auto e = params(expected);
  auto s = params(sum);
  for (std::size_t i = 0; i < e.size(); ++i) *e[i] -= 0.5 * *s[i];

  LearnConfig cfg;
  cfg.eta = 0.5;
  cfg.batch = 4;
  cfg.max_epochs = 1;
  train_mlp(m, data, cfg);
  auto got = params(m);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(*got[i] == doctest::Approx(*e[i]).epsilon(1e-14));
}

TEST_CASE("windows") {
  Trace t;
  for (std::uint64_t i = 0; i < 10; ++i) t.samples.push_back({i * 81, 0, 0, 1, Activity::kRest});
  const auto w = windows(t, {4, 4, WindowFeature::kMagnitudeSq});
  REQUIRE(w.size() == 2);
  CHECK(w[0].label == Activity::kRest);
  CHECK(w[1].first == 4);
  CHECK(w[0].x == std::vector<double>{1, 1, 1, 1});
  CHECK(windows(t, {3, 1, WindowFeature::kRawAxes}).size() == 8);
  CHECK(windows(t, {3, 1, WindowFeature::kRawAxes})[0].x.size() == 9);
  CHECK_THROWS_AS(windows(t, {11, 1, WindowFeature::kMagnitudeSq}), DataError);
  CHECK_THROWS_AS(windows(t, {0, 1, WindowFeature::kMagnitudeSq}), DataError);
}

TEST_CASE("majority label prefers the more severe class on ties") {
  auto s = [](Activity a) { return AccelSample{0, 0, 0, 1, a}; };
  const std::vector<AccelSample> tie{s(Activity::kRest), s(Activity::kRest), s(Activity::kFall), s(Activity::kFall)};
  CHECK(majority_label(tie) == Activity::kFall);
  const std::vector<AccelSample> rest3{s(Activity::kRest), s(Activity::kRest), s(Activity::kRest), s(Activity::kFall)};
  CHECK(majority_label(rest3) == Activity::kRest);
  const std::vector<AccelSample> walk_tie{s(Activity::kRest), s(Activity::kWalk)};
  CHECK(majority_label(walk_tie) == Activity::kWalk);
}

TEST_CASE("model files round trip losslessly") {
  const LinearModel lin{{0.1, -1.0 / 3.0, 1e-300}, 2.0 / 7.0, OutputKind::kSign};
  CHECK(parse_linear_model(format_model(lin)) == lin);

  WindowDetector d;
  d.window = {5, 2, WindowFeature::kRawAxes};
  d.model = mlp_init(15, 4, 3, 77);
  const WindowDetector back = parse_detector(format_model(d));
  CHECK(back.model == d.model);
  CHECK(back.window.width == 5);
  CHECK(back.window.stride == 2);
  CHECK(back.window.feature == WindowFeature::kRawAxes);

  test::TempDir dir;
  save_model(d, dir / "m.txt");
  CHECK(load_detector(dir / "m.txt").model == d.model);
}

TEST_CASE("model file errors") {
  CHECK_THROWS(parse_linear_model(""));
  CHECK_THROWS(parse_linear_model("not-a-model v1\n"));
  WindowDetector d;
  d.model = mlp_init(3, 2, 3, 1);
  std::string text = format_model(d);
  CHECK_THROWS(parse_detector(text.substr(0, text.size() / 2)));
  WindowDetector two;
  two.model = mlp_init(3, 2, 2, 1);
  CHECK_THROWS(parse_detector(format_model(two)));
}

TEST_CASE("neural tier replays the detector window by window") {
  const WindowDetector det = train_detector(default_detector_training());
  auto shared = std::make_shared<const WindowDetector>(det);
  TraceSpec s;
  s.duration_min = 5;
  s.activity_fraction = 0.2;
  s.fall_count = 4;
  for (std::uint64_t seed : {3u, 4u}) {
    const Trace t = generate_trace(s, seed);
    NodeConfig c;
    c.tier = Tier::kNeural;
    c.detector = shared;
    const auto log = run_node(t, c, true);

    // Independent replay: window the trace, classify, keep FALL windows.
    std::vector<std::uint64_t> expected;
    for (const auto& w : windows(t, det.window)) {
      const auto y = mlp_forward(det.model, w.x);
      if (argmax(y) == 2) expected.push_back(t.samples[w.first + det.window.width - 1].t_ms);
    }
    std::vector<std::uint64_t> got;
    for (const auto& d : *log.decisions) {
      CHECK(d.decision.kind() == DecisionKind::kTransmitAlarm);
      got.push_back(d.t_ms);
    }
    CHECK(got == expected);
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "ecaml/errors.hpp"
#include "ecaml/gradcheck.hpp"
#include "ecaml/mlp.hpp"
#include "support/oracles.hpp"

using namespace ecaml;

namespace {

MlpParams with_random_biases(MlpParams p, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& layer : p.layers)
    for (double& b : layer.bias) b = n(rng);
  return p;
}

// Scalar loss sum_ij c_ij * out_ij with fixed random coefficients.
struct LinearProbe {
  Matrix coeff;
  double value(const Matrix& out) const {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += coeff.flat()[i] * out.flat()[i];
    return s;
  }
};

}  // namespace

TEST_CASE("init_params is deterministic in the seed") {
  MlpConfig cfg{10, {16, 8}, 4, false, 7};
  MlpParams a = init_params(cfg), b = init_params(cfg);
  auto fa = flatten(a), fb = flatten(b);
  REQUIRE(fa.size() == fb.size());
  CHECK(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)) == 0);
  cfg.seed = 8;
  CHECK(flatten(init_params(cfg)) != fa);
}

TEST_CASE("init_params shapes follow the config") {
  MlpParams p = init_params({4, {8}, 2, false, 0});
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].weight.rows() == 4);
  CHECK(p.layers[0].weight.cols() == 8);
  CHECK(p.layers[1].weight.rows() == 8);
  CHECK(p.layers[1].weight.cols() == 2);
  CHECK(p.layers[0].bias == std::vector<double>(8, 0.0));
  CHECK(p.parameter_count() == 4 * 8 + 8 + 8 * 2 + 2);
}

TEST_CASE("init_params rejects zero dimensions") {
  CHECK_THROWS_AS(init_params({0, {8}, 2, false, 0}), ConfigError);
  CHECK_THROWS_AS(init_params({4, {0}, 2, false, 0}), ConfigError);
  CHECK_THROWS_AS(init_params({4, {8}, 0, false, 0}), ConfigError);
}

TEST_CASE("He weights stay within three standard deviations over 10^4 draws") {
  const std::size_t fan_in = 25;
  const double scale = std::sqrt(2.0 / fan_in);
  MlpParams p = init_params({fan_in, {}, 400, false, 123});
  const Matrix& w = p.layers[0].weight;
  REQUIRE(w.size() == 10000);
  double max_abs = 0.0, sum = 0.0, sum_sq = 0.0;
  for (double v : w.flat()) {
    max_abs = std::max(max_abs, std::abs(v));
    sum += v;
    sum_sq += v * v;
  }
  CHECK(max_abs <= 3.0 * scale);
  double mean = sum / w.size();
  double sd = std::sqrt(sum_sq / w.size() - mean * mean);
  CHECK(std::abs(mean) < 4.0 * scale / 100.0);
  // A normal truncated at 3 sigma keeps 98.6% of the variance.
  CHECK(sd == Catch::Approx(scale * std::sqrt(0.9733)).epsilon(0.03));
}

TEST_CASE("forward with zero parameters gives zero embeddings") {
  MlpParams p = init_params({3, {5}, 2, false, 0});
  for (auto& layer : p.layers) layer.weight.fill(0.0);
  std::mt19937_64 rng(1);
  Matrix x = oracle::random_matrix(4, 3, rng);
  Matrix e = forward(p, x).embeddings;
  for (double v : e.flat()) CHECK(v == 0.0);
}

TEST_CASE("identity single layer reproduces its input") {
  MlpParams p = init_params({3, {}, 3, false, 0});
  p.layers[0].weight.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) p.layers[0].weight(i, i) = 1.0;
  std::mt19937_64 rng(2);
  Matrix x = oracle::random_matrix(5, 3, rng);
  CHECK(forward(p, x).embeddings == x);
}

TEST_CASE("normalized outputs have unit rows") {
  std::mt19937_64 rng(3);
  MlpParams p = with_random_biases(init_params({6, {10}, 4, true, 3}), rng);
  Matrix x = oracle::random_matrix(20, 6, rng);
  ForwardResult f = forward(p, x);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(std::sqrt(oracle::dot(f.embeddings, i, f.embeddings, i)) - 1.0) <= 1e-12);
  CHECK(embed(p, x) == f.embeddings);
}

TEST_CASE("forward validates its input") {
  MlpParams p = init_params({3, {4}, 2, false, 0});
  CHECK_THROWS_AS(forward(p, Matrix(2, 4)), ShapeError);
  Matrix bad(2, 3);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(forward(p, bad), InputError);
}

TEST_CASE("backward of a zero upstream gradient is zero") {
  std::mt19937_64 rng(4);
  MlpParams p = with_random_biases(init_params({3, {5, 4}, 2, true, 4}), rng);
  Matrix x = oracle::random_matrix(6, 3, rng);
  ForwardResult f = forward(p, x);
  Gradients g = backward(p, f.trace, Matrix(6, 2));
  for (double v : flatten(g.params)) CHECK(v == 0.0);
  for (double v : g.inputs.flat()) CHECK(v == 0.0);
}

TEST_CASE("single linear layer: sum of outputs gives input^T 1") {
  std::mt19937_64 rng(5);
  MlpParams p = init_params({3, {}, 2, false, 5});
  Matrix x = oracle::random_matrix(4, 3, rng);
  ForwardResult f = forward(p, x);
  Gradients g = backward(p, f.trace, Matrix(4, 2, 1.0));
  for (std::size_t r = 0; r < 3; ++r) {
    double col = 0.0;
    for (std::size_t i = 0; i < 4; ++i) col += x(i, r);
    for (std::size_t c = 0; c < 2; ++c) CHECK(g.params.layers[0].weight(r, c) == Catch::Approx(col).margin(1e-14));
  }
  for (double b : g.params.layers[0].bias) CHECK(b == Catch::Approx(4.0));
}

TEST_CASE("backward matches central differences on random 3-layer nets") {
  for (bool normalize : {false, true}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(100 + seed);
      MlpParams p = with_random_biases(init_params({4, {7, 5}, 3, normalize, seed}), rng);
      Matrix x = oracle::random_matrix(6, 4, rng);
      LinearProbe probe{oracle::random_matrix(6, 3, rng)};

      ForwardResult f = forward(p, x);
      Gradients g = backward(p, f.trace, probe.coeff);
      auto analytic = flatten(g.params);
      auto numeric = oracle::numeric_gradient(
          [&](const std::vector<double>& theta) {
            MlpParams q = p;
            unflatten(theta, q);
            return probe.value(forward(q, x).embeddings);
          },
          flatten(p));
      INFO("normalize=" << normalize << " seed=" << seed);
      CHECK(oracle::max_relative_error(analytic, numeric) <= 1e-4);

      std::vector<double> xin(x.flat().begin(), x.flat().end());
      auto numeric_in = oracle::numeric_gradient(
          [&](const std::vector<double>& v) { return probe.value(forward(p, Matrix(6, 4, v)).embeddings); }, xin);
      std::vector<double> analytic_in(g.inputs.flat().begin(), g.inputs.flat().end());
      CHECK(oracle::max_relative_error(analytic_in, numeric_in) <= 1e-4);
    }
  }
}

TEST_CASE("normalization Jacobian makes raw-output gradients tangent to the sphere") {
  std::mt19937_64 rng(6);
  MlpParams p = with_random_biases(init_params({5, {}, 4, true, 6}), rng);
  Matrix x = oracle::random_matrix(8, 5, rng);
  ForwardResult f = forward(p, x);
  Matrix upstream = oracle::random_matrix(8, 4, rng);
  // With a single linear layer, the gradient w.r.t. the bias summed over one
  // row equals the raw-output gradient of that row; check it per row instead.
  for (std::size_t i = 0; i < 8; ++i) {
    Matrix one(8, 4);
    for (std::size_t c = 0; c < 4; ++c) one(i, c) = upstream(i, c);
    Gradients g = backward(p, f.trace, one);
    double d = 0.0;
    for (std::size_t c = 0; c < 4; ++c) d += g.params.layers[0].bias[c] * f.trace.raw_output(i, c);
    CHECK(std::abs(d) <= 1e-8);
  }
}

TEST_CASE("output_layer_only scope touches only the last layer") {
  std::mt19937_64 rng(7);
  MlpParams p = with_random_biases(init_params({3, {5}, 2, false, 7}), rng);
  Matrix x = oracle::random_matrix(4, 3, rng);
  ForwardResult f = forward(p, x);
  Matrix up = oracle::random_matrix(4, 2, rng);
  Gradients full = backward(p, f.trace, up);
  Gradients last = backward(p, f.trace, up, BackwardScope::output_layer_only);
  for (double v : last.params.layers[0].weight.flat()) CHECK(v == 0.0);
  for (double v : last.params.layers[0].bias) CHECK(v == 0.0);
  CHECK(last.params.layers[1] == full.params.layers[1]);
  CHECK(last.inputs.empty());
}

TEST_CASE("adam: zero gradient and zero decay is a fixed point") {
  MlpParams p = init_params({3, {4}, 2, false, 1});
  MlpParams before = p;
  AdamState s = AdamState::for_params(p);
  for (int i = 0; i < 3; ++i) adam_step(p, p.zeros_like(), s, {0.1, 0.0, {}});
  CHECK(p == before);
  CHECK(s.step == 3);
}

TEST_CASE("adam with beta1 = beta2 = eps = 0 is sign descent") {
  MlpParams p = init_params({1, {}, 1, false, 0});
  p.layers[0].weight(0, 0) = 1.0;
  p.layers[0].bias[0] = 0.0;
  MlpParams g = p.zeros_like();
  g.layers[0].weight(0, 0) = 1.0;
  AdamState s = AdamState::for_params(p);
  s.beta1 = 0.0;
  s.beta2 = 0.0;
  s.epsilon = 0.0;
  adam_step(p, g, s, {0.1, 0.0, {}});
  CHECK(p.layers[0].weight(0, 0) == Catch::Approx(0.9).margin(1e-15));
  CHECK(p.layers[0].bias[0] == 0.0);
}

TEST_CASE("adam minimizes (w - 3)^2 in 100 steps") {
  MlpParams p = init_params({1, {}, 1, false, 0});
  p.layers[0].weight(0, 0) = 0.0;
  AdamState s = AdamState::for_params(p);
  for (int i = 0; i < 100; ++i) {
    MlpParams g = p.zeros_like();
    g.layers[0].weight(0, 0) = 2.0 * (p.layers[0].weight(0, 0) - 3.0);
    adam_step(p, g, s, {0.1, 0.0, {}});
  }
  CHECK(std::abs(p.layers[0].weight(0, 0) - 3.0) < 0.05);
}

TEST_CASE("adam applies per-layer multipliers and L2 decay") {
  MlpParams p = init_params({2, {2}, 2, false, 2});
  MlpParams q = p;
  AdamState s1 = AdamState::for_params(p), s2 = AdamState::for_params(q);
  MlpParams g = p.zeros_like();
  for (auto& l : g.layers) l.weight.fill(1.0);
  adam_step(p, g, s1, {0.01, 0.0, {1.0, 10.0}});
  adam_step(q, g, s2, {0.01, 0.0, {}});
  // First Adam step moves each coordinate by lr * mult (up to epsilon).
  CHECK(q.layers[1].weight(0, 0) - p.layers[1].weight(0, 0) == Catch::Approx(0.09).epsilon(1e-6));
  CHECK(p.layers[0].weight == q.layers[0].weight);

  MlpParams r = init_params({2, {}, 1, false, 3});
  r.layers[0].weight(0, 0) = 2.0;
  AdamState s3 = AdamState::for_params(r);
  adam_step(r, r.zeros_like(), s3, {0.01, 0.5, {}});
  CHECK(r.layers[0].weight(0, 0) == Catch::Approx(1.99).epsilon(1e-6));
}

TEST_CASE("adam rejects non-finite gradients with a diagnostic") {
  MlpParams p = init_params({2, {}, 1, false, 0});
  MlpParams g = p.zeros_like();
  g.layers[0].weight(1, 0) = std::nan("");
  AdamState s = AdamState::for_params(p);
  try {
    adam_step(p, g, s, {0.1, 0.0, {}});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("finite_diff_check: linear objective is exact, corrupted gradient is caught") {
  std::vector<double> c{1.5, -2.0, 0.25, 4.0};
  Objective linear = [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += c[i] * x[i];
    return ValueAndGradient{v, c};
  };
  std::vector<double> x0{0.3, -1.0, 2.0, 0.7};
  CHECK(finite_diff_check(linear, x0).max_relative_error <= 1e-10);

  Objective quad = [](std::span<const double> x) {
    ValueAndGradient r;
    for (double v : x) {
      r.value += v * v;
      r.gradient.push_back(2.0 * v);
    }
    r.gradient[2] *= 2.0;
    return r;
  };
  GradCheckReport rep = finite_diff_check(quad, x0);
  CHECK(rep.max_relative_error >= 0.3);
  CHECK(rep.worst_index == 2);
}

TEST_CASE("flatten and unflatten round-trip") {
  MlpParams p = init_params({3, {4}, 2, true, 9});
  MlpParams q = p.zeros_like();
  unflatten(flatten(p), q);
  CHECK(q == p);
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(unflatten(wrong, q), ShapeError);
}

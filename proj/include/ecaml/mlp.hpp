#pragma once

// The trainable embedding function: a ReLU multilayer perceptron with a
// linear output layer, optional projection onto the unit sphere, explicit
// reverse-mode gradients and an Adam optimizer.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ecaml/matrix.hpp"

namespace ecaml {

struct MlpConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t embedding_dim = 32;
  bool normalize_output = false;
  std::uint64_t seed = 0;

  // Throws ConfigError on any zero dimension.
  void validate() const;
};

// One affine layer. `weight` is fan_in x fan_out so a batch forward pass is
// inputs (N x fan_in) times weight.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  bool normalize_output = false;

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  // Zero-filled parameters with the same shapes.
  MlpParams zeros_like() const;

  bool operator==(const MlpParams&) const = default;
};

// Layer-major flattening (weights row-major, then bias) used by the
// gradient checker and the optimizer tests.
std::vector<double> flatten(const MlpParams& params);
void unflatten(std::span<const double> values, MlpParams& params);

// He initialization: weights ~ N(0, 2/fan_in) truncated at three standard
// deviations, biases zero. Deterministic in config.seed.
MlpParams init_params(const MlpConfig& config);

struct ForwardTrace {
  Matrix input;
  // Per layer: z = a_prev * W + b and the activation that feeds the next
  // layer (ReLU for hidden layers, identity for the output layer).
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  Matrix raw_output;
  // Equal to raw_output unless normalization is enabled.
  Matrix output;
  std::vector<double> row_norms;
  bool normalized = false;
};

struct ForwardResult {
  Matrix embeddings;
  ForwardTrace trace;
};

// Throws ShapeError on width mismatch and InputError on non-finite input.
ForwardResult forward(const MlpParams& params, const Matrix& inputs);

// Forward pass without keeping the trace; used for evaluation.
Matrix embed(const MlpParams& params, const Matrix& inputs);

enum class BackwardScope {
  full,
  // Only the output layer receives gradients; the signal is not propagated
  // into the hidden layers or the inputs.
  output_layer_only,
};

struct Gradients {
  MlpParams params;
  // Empty for BackwardScope::output_layer_only.
  Matrix inputs;
};

Gradients backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& grad_embeddings,
                   BackwardScope scope = BackwardScope::full);

// Accumulates `other` into `into` element-wise. Shapes must agree.
void add_in_place(MlpParams& into, const MlpParams& other);

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& params);
};

struct AdamOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  // One multiplier per layer; empty means 1 everywhere.
  std::vector<double> layer_lr_multipliers;
};

// Adam with a classic L2 term: weight_decay * w is added to the gradient
// before the moment update. Throws NumericError naming the first offending
// coordinate if a gradient or an updated parameter is not finite.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamOptions& options);

}  // namespace ecaml

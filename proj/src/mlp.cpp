#include "ecaml/mlp.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "ecaml/kernels.hpp"

namespace ecaml {

void MlpConfig::validate() const {
  if (input_dim == 0) throw ConfigError("mlp.input_dim must be >= 1");
  if (embedding_dim == 0) throw ConfigError("mlp.embedding_dim must be >= 1");
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] == 0) {
      throw ConfigError("mlp.hidden_dims[" + std::to_string(i) + "] must be >= 1");
    }
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!ecaml::all_finite(layer.weight.flat()) || !ecaml::all_finite(layer.bias)) return false;
  }
  return true;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  out.normalize_output = normalize_output;
  out.layers.reserve(layers.size());
  for (const auto& layer : layers) {
    out.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                          std::vector<double>(layer.bias.size(), 0.0)});
  }
  return out;
}

std::vector<double> flatten(const MlpParams& params) {
  std::vector<double> out;
  out.reserve(params.parameter_count());
  for (const auto& layer : params.layers) {
    out.insert(out.end(), layer.weight.flat().begin(), layer.weight.flat().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

void unflatten(std::span<const double> values, MlpParams& params) {
  if (values.size() != params.parameter_count()) throw ShapeError("flat parameter vector has wrong length");
  std::size_t at = 0;
  for (auto& layer : params.layers) {
    auto w = layer.weight.flat();
    std::copy_n(values.begin() + at, w.size(), w.begin());
    at += w.size();
    std::copy_n(values.begin() + at, layer.bias.size(), layer.bias.begin());
    at += layer.bias.size();
  }
}

MlpParams init_params(const MlpConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  MlpParams params;
  params.normalize_output = config.normalize_output;
  std::size_t fan_in = config.input_dim;
  auto add_layer = [&](std::size_t fan_out) {
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& w : layer.weight.flat()) {
      double z = normal(rng);
      while (std::abs(z) > 3.0) z = normal(rng);
      w = scale * z;
    }
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (std::size_t h : config.hidden_dims) add_layer(h);
  add_layer(config.embedding_dim);
  return params;
}

namespace {

// out = inputs * layer.weight + layer.bias
Matrix affine(const Matrix& inputs, const DenseLayer& layer) {
  const std::size_t fan_in = layer.weight.rows();
  Matrix out(inputs.rows(), layer.weight.cols());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(layer.bias.begin(), layer.bias.end(), dst.begin());
    const auto src = inputs.row(i);
    for (std::size_t k = 0; k < fan_in; ++k) {
      if (src[k] != 0.0) kernels::axpy(src[k], layer.weight.row(k), dst);
    }
  }
  return out;
}

void check_inputs(const MlpParams& params, const Matrix& inputs) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (inputs.cols() != params.input_dim()) {
    std::ostringstream msg;
    msg << "input width " << inputs.cols() << " does not match network input_dim " << params.input_dim();
    throw ShapeError(msg.str());
  }
  if (!all_finite(inputs.flat())) throw InputError("non-finite value in network inputs");
}

}  // namespace

ForwardResult forward(const MlpParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  ForwardTrace trace;
  trace.input = inputs;
  trace.normalized = params.normalize_output;
  const Matrix* current = &trace.input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    trace.pre_activations.push_back(affine(*current, params.layers[l]));
    Matrix act = trace.pre_activations.back();
    if (l + 1 < params.layers.size()) {
      for (double& v : act.flat()) v = v > 0.0 ? v : 0.0;
    }
    trace.activations.push_back(std::move(act));
    current = &trace.activations.back();
  }
  trace.raw_output = trace.activations.back();
  trace.output = trace.raw_output;
  if (params.normalize_output) {
    trace.row_norms.resize(trace.output.rows());
    for (std::size_t i = 0; i < trace.output.rows(); ++i) {
      auto row = trace.output.row(i);
      const double norm = std::sqrt(kernels::squared_norm(row));
      if (norm == 0.0) throw InputError("cannot normalize a zero embedding (row " + std::to_string(i) + ")");
      trace.row_norms[i] = norm;
      for (double& v : row) v /= norm;
    }
  }
  Matrix embeddings = trace.output;
  return {std::move(embeddings), std::move(trace)};
}

Matrix embed(const MlpParams& params, const Matrix& inputs) { return forward(params, inputs).embeddings; }

Gradients backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& grad_embeddings,
                   BackwardScope scope) {
  if (trace.activations.size() != params.layers.size()) throw ShapeError("trace does not match network depth");
  if (grad_embeddings.rows() != trace.output.rows() || grad_embeddings.cols() != trace.output.cols()) {
    throw ShapeError("embedding gradient shape does not match forward output");
  }

  // Through y = x/|x|: dx = (g - y (y.g)) / |x|
  Matrix delta = grad_embeddings;
  if (trace.normalized) {
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      auto g = delta.row(i);
      const auto y = trace.output.row(i);
      const double along = kernels::dot(y, g);
      kernels::axpy(-along, y, g);
      for (double& v : g) v /= trace.row_norms[i];
    }
  }

  Gradients out{params.zeros_like(), Matrix()};
  const std::size_t depth = params.layers.size();
  for (std::size_t l = depth; l-- > 0;) {
    const Matrix& below = l == 0 ? trace.input : trace.activations[l - 1];
    auto& grad_layer = out.params.layers[l];
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto d = delta.row(i);
      const auto a = below.row(i);
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] != 0.0) kernels::axpy(a[k], d, grad_layer.weight.row(k));
      }
      kernels::axpy(1.0, d, grad_layer.bias);
    }
    if (scope == BackwardScope::output_layer_only) break;

    // Propagate to the layer below: delta * W^T, then the ReLU mask.
    const Matrix& weight = params.layers[l].weight;
    Matrix next(delta.rows(), weight.rows());
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto d = delta.row(i);
      auto dst = next.row(i);
      for (std::size_t k = 0; k < weight.rows(); ++k) dst[k] = kernels::dot(d, weight.row(k));
    }
    if (l > 0) {
      const Matrix& z = trace.pre_activations[l - 1];
      auto nf = next.flat();
      const auto zf = z.flat();
      for (std::size_t t = 0; t < nf.size(); ++t) {
        if (zf[t] <= 0.0) nf[t] = 0.0;
      }
    } else {
      out.inputs = std::move(next);
      break;
    }
    delta = std::move(next);
  }
  return out;
}

void add_in_place(MlpParams& into, const MlpParams& other) {
  if (into.layers.size() != other.layers.size()) throw ShapeError("parameter sets differ in depth");
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    auto a = into.layers[l].weight.flat();
    const auto b = other.layers[l].weight.flat();
    if (a.size() != b.size() || into.layers[l].bias.size() != other.layers[l].bias.size()) {
      throw ShapeError("parameter sets differ in layer shape");
    }
    kernels::axpy(1.0, b, a);
    kernels::axpy(1.0, other.layers[l].bias, into.layers[l].bias);
  }
}

AdamState AdamState::for_params(const MlpParams& params) {
  AdamState state;
  state.first_moment = params.zeros_like();
  state.second_moment = params.zeros_like();
  return state;
}

namespace {

struct AdamCoefficients {
  double beta1, beta2, epsilon, correction1, correction2;
};

void adam_update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c, double lr, double weight_decay) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double grad = g[i] + weight_decay * w[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad * grad;
    const double m_hat = m[i] / c.correction1;
    const double denom = std::sqrt(v[i] / c.correction2) + c.epsilon;
    if (denom > 0.0) w[i] -= lr * m_hat / denom;
  }
}

std::string describe_non_finite(const MlpParams& p, const char* what) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto w = p.layers[l].weight.flat();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(w[i])) {
        std::ostringstream msg;
        msg << "non-finite " << what << " at layer " << l << " weight (" << i / p.layers[l].weight.cols() << ", "
            << i % p.layers[l].weight.cols() << "): " << w[i];
        return msg.str();
      }
    }
    for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i) {
      if (!std::isfinite(p.layers[l].bias[i])) {
        std::ostringstream msg;
        msg << "non-finite " << what << " at layer " << l << " bias " << i << ": " << p.layers[l].bias[i];
        return msg.str();
      }
    }
  }
  return std::string("non-finite ") + what;
}

}  // namespace

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamOptions& options) {
  if (!(options.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (grads.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size()) {
    throw ShapeError("optimizer state does not match parameters");
  }
  if (!options.layer_lr_multipliers.empty() && options.layer_lr_multipliers.size() != params.layers.size()) {
    throw ConfigError("need one learning-rate multiplier per layer");
  }
  if (!grads.all_finite()) throw NumericError(describe_non_finite(grads, "gradient"));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const AdamCoefficients c{state.beta1, state.beta2, state.epsilon, 1.0 - std::pow(state.beta1, t),
                           1.0 - std::pow(state.beta2, t)};
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const double mult = options.layer_lr_multipliers.empty() ? 1.0 : options.layer_lr_multipliers[l];
    const double lr = options.lr * mult;
    auto& layer = params.layers[l];
    adam_update(layer.weight.flat(), grads.layers[l].weight.flat(), state.first_moment.layers[l].weight.flat(),
                state.second_moment.layers[l].weight.flat(), c, lr, options.weight_decay);
    adam_update(layer.bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
                state.second_moment.layers[l].bias, c, lr, options.weight_decay);
  }
  if (!params.all_finite()) throw NumericError(describe_non_finite(params, "parameter after update"));
}

}  // namespace ecaml

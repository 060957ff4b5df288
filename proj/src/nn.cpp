#include "drnd/nn.hpp"

#include <cmath>
#include <cstring>

#include "drnd/error.hpp"
#include "drnd/rng.hpp"

namespace drnd {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(InitScheme s) {
  return s == InitScheme::he_uniform ? "he_uniform" : "fan_in_uniform";
}

InitScheme init_scheme_from_string(const std::string& name) {
  if (name == "he_uniform") return InitScheme::he_uniform;
  if (name == "fan_in_uniform") return InitScheme::fan_in_uniform;
  throw ConfigError("unknown init scheme '" + name + "'");
}

void MlpSpec::validate() const {
  if (layer_dims.size() < 2) {
    throw ConfigError("mlp needs at least an input and an output dim, got " +
                      std::to_string(layer_dims.size()) + " dims");
  }
  for (std::size_t i = 0; i < layer_dims.size(); ++i) {
    if (layer_dims[i] < 1) {
      throw ConfigError("mlp layer dim " + std::to_string(i) + " must be >= 1, got " +
                        std::to_string(layer_dims[i]));
    }
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

MlpGrads& MlpGrads::operator*=(double scale) {
  for (auto& l : layers) {
    l.weight *= scale;
    l.bias *= scale;
  }
  return *this;
}

MlpParams mlp_init(const MlpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  MlpParams params;
  params.spec = spec;
  params.layers.reserve(spec.layer_dims.size() - 1);
  for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
    const int fan_in = spec.layer_dims[l];
    const int fan_out = spec.layer_dims[l + 1];
    const double w_bound = spec.init == InitScheme::he_uniform ? std::sqrt(6.0 / fan_in)
                                                               : 1.0 / std::sqrt(static_cast<double>(fan_in));
    const double b_bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out)};
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-w_bound, w_bound);
    }
    for (int r = 0; r < fan_out; ++r) layer.bias(r) = rng.uniform(-b_bound, b_bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void activate(Activation a, const Matrix& pre, Matrix& post) {
  switch (a) {
    case Activation::relu: post = pre.cwiseMax(0.0); break;
    case Activation::tanh: post = pre.array().tanh().matrix(); break;
    case Activation::identity: post = pre; break;
  }
}

// Multiplies delta in place by the activation derivative.
void activation_backward(Activation a, const Matrix& pre, const Matrix& post, Matrix& delta) {
  switch (a) {
    case Activation::relu:
      delta = (pre.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::tanh:
      delta.array() *= (1.0 - post.array().square());
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace

Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs, ForwardCache* cache) {
  if (inputs.rows() != params.input_dim()) {
    throw ShapeError("mlp input has " + std::to_string(inputs.rows()) + " rows, expected " +
                     std::to_string(params.input_dim()));
  }
  const std::size_t n_layers = params.layers.size();
  if (cache) {
    cache->input = inputs;
    cache->pre.resize(n_layers);
    cache->post.resize(n_layers);
  }
  Matrix current = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = params.layers[l];
    Matrix pre = layer.weight * current;
    pre.colwise() += layer.bias;
    Matrix post;
    if (l + 1 < n_layers) {
      activate(params.spec.activation, pre, post);
    } else {
      post = pre;
    }
    if (cache) {
      cache->pre[l] = pre;
      cache->post[l] = post;
    }
    current = std::move(post);
  }
  return current;
}

Vector mlp_forward(const MlpParams& params, const Vector& input) {
  if (input.size() != params.input_dim()) {
    throw ShapeError("mlp input has length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(params.input_dim()));
  }
  Matrix out = mlp_forward_batch(params, input);
  return out.col(0);
}

BackwardResult mlp_backward_batch(const MlpParams& params, const ForwardCache& cache,
                                  const Matrix& upstream) {
  const std::size_t n_layers = params.layers.size();
  if (cache.pre.size() != n_layers) throw ShapeError("forward cache does not match network depth");
  if (upstream.rows() != params.output_dim() || upstream.cols() != cache.input.cols()) {
    throw ShapeError("upstream gradient is " + std::to_string(upstream.rows()) + "x" +
                     std::to_string(upstream.cols()) + ", expected " +
                     std::to_string(params.output_dim()) + "x" + std::to_string(cache.input.cols()));
  }
  BackwardResult result;
  result.grads.layers.resize(n_layers);
  Matrix delta = upstream;
  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& layer_input = l == 0 ? cache.input : cache.post[l - 1];
    result.grads.layers[l].weight = delta * layer_input.transpose();
    result.grads.layers[l].bias = delta.rowwise().sum();
    Matrix prev = params.layers[l].weight.transpose() * delta;
    if (l > 0) activation_backward(params.spec.activation, cache.pre[l - 1], cache.post[l - 1], prev);
    delta = std::move(prev);
  }
  result.input_grads = std::move(delta);
  return result;
}

BackwardResult mlp_backward(const MlpParams& params, const Vector& input, const Vector& upstream) {
  if (upstream.size() != params.output_dim()) {
    throw ShapeError("upstream gradient has length " + std::to_string(upstream.size()) +
                     ", expected " + std::to_string(params.output_dim()));
  }
  ForwardCache cache;
  Matrix in = input;
  if (in.rows() != params.input_dim()) {
    throw ShapeError("mlp input has length " + std::to_string(in.rows()) + ", expected " +
                     std::to_string(params.input_dim()));
  }
  mlp_forward_batch(params, in, &cache);
  Matrix up = upstream;
  return mlp_backward_batch(params, cache, up);
}

std::vector<double> flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void unflatten(std::span<const double> values, std::vector<DenseLayer>& layers) {
  std::size_t k = 0;
  for (auto& l : layers) {
    const auto need = static_cast<std::size_t>(l.weight.size() + l.bias.size());
    if (k + need > values.size()) throw ShapeError("flat parameter array too short");
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = values[k++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = values[k++];
  }
  if (k != values.size()) throw ShapeError("flat parameter array too long");
}

std::uint64_t fingerprint(const MlpParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : flatten(params.layers)) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

bool all_finite(const MlpParams& params) {
  for (const auto& l : params.layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

AdamState::AdamState(const MlpParams& params, AdamConfig cfg)
    : config(cfg),
      first_moment(MlpGrads::zeros_like(params)),
      second_moment(MlpGrads::zeros_like(params)) {}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads) {
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.layers.size() != params.layers.size()) {
    throw ShapeError("adam: gradient/state layer count does not match parameters");
  }
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    if (g.weight.rows() != params.layers[l].weight.rows() ||
        g.weight.cols() != params.layers[l].weight.cols() ||
        g.bias.size() != params.layers[l].bias.size()) {
      throw ShapeError("adam: gradient shape mismatch in layer " + std::to_string(l));
    }
    if (!g.weight.allFinite() || !g.bias.allFinite()) {
      throw NumericError("adam: non-finite gradient in layer " + std::to_string(l));
    }
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param.array() -= cfg.lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + cfg.epsilon);
  };
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    update(params.layers[l].weight, state.first_moment.layers[l].weight,
           state.second_moment.layers[l].weight, grads.layers[l].weight);
    update(params.layers[l].bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias, grads.layers[l].bias);
  }
}

void soft_update(MlpParams& target, const MlpParams& source, double tau) {
  if (target.layers.size() != source.layers.size()) throw ShapeError("soft_update: depth mismatch");
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    target.layers[l].weight = (1.0 - tau) * target.layers[l].weight + tau * source.layers[l].weight;
    target.layers[l].bias = (1.0 - tau) * target.layers[l].bias + tau * source.layers[l].bias;
  }
}

}  // namespace drnd

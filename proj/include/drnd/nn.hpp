#pragma once

// Dense multilayer perceptrons with hand-written reverse mode and Adam.
//
// Conventions:
//  * weights are stored out x in, so a layer computes W * x + b;
//  * batches are matrices with one sample per column;
//  * the activation applies to hidden layers only, the output layer is
//    always linear;
//  * everything is double precision.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace drnd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Weight bound per layer: he_uniform uses sqrt(6 / fan_in), fan_in_uniform
// uses 1 / sqrt(fan_in) (the common framework default for linear layers).
// Biases are U(-1/sqrt(fan_in), +1/sqrt(fan_in)) in both schemes.
enum class InitScheme { he_uniform, fan_in_uniform };

std::string to_string(InitScheme s);
InitScheme init_scheme_from_string(const std::string& name);

struct MlpSpec {
  std::vector<int> layer_dims;  // input, hidden..., output
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::he_uniform;

  // Throws ConfigError when fewer than two dims or any dim < 1.
  void validate() const;
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct MlpParams {
  MlpSpec spec;
  std::vector<DenseLayer> layers;

  int input_dim() const { return spec.input_dim(); }
  int output_dim() const { return spec.output_dim(); }
  std::size_t parameter_count() const;
};

// Gradient container, shaped like MlpParams::layers.
struct MlpGrads {
  std::vector<DenseLayer> layers;

  static MlpGrads zeros_like(const MlpParams& params);
  MlpGrads& operator+=(const MlpGrads& other);
  MlpGrads& operator*=(double scale);
};

// Draws weights (row-major) then biases, layer by layer, from Rng(spec.seed)
// with the bounds of spec.init. Throws ConfigError on an invalid spec.
MlpParams mlp_init(const MlpSpec& spec);

// Activations recorded during a batched forward pass.
struct ForwardCache {
  Matrix input;                   // in x B
  std::vector<Matrix> pre;        // pre-activation of every layer
  std::vector<Matrix> post;       // post-activation of every layer
};

Vector mlp_forward(const MlpParams& params, const Vector& input);
Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs,
                         ForwardCache* cache = nullptr);

struct BackwardResult {
  MlpGrads grads;      // summed over the batch
  Matrix input_grads;  // in x B, d(sum upstream . output) / d input
};

// Gradient of upstream . f(input) with respect to every parameter and the
// input. Throws ShapeError on mismatched sizes.
BackwardResult mlp_backward(const MlpParams& params, const Vector& input, const Vector& upstream);
BackwardResult mlp_backward_batch(const MlpParams& params, const ForwardCache& cache,
                                  const Matrix& upstream);

// Flat row-major view: for each layer, weight rows then bias.
std::vector<double> flatten(const std::vector<DenseLayer>& layers);
void unflatten(std::span<const double> values, std::vector<DenseLayer>& layers);

// 64-bit FNV-1a over the raw bytes of the flattened parameters.
std::uint64_t fingerprint(const MlpParams& params);

bool all_finite(const MlpParams& params);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  MlpGrads first_moment;
  MlpGrads second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const MlpParams& params, AdamConfig cfg);
};

// Bias-corrected Adam. Throws NumericError naming the first layer whose
// gradient is non-finite; in that case neither state nor params change.
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads);

// Polyak averaging used for target critics: target = (1 - tau) target + tau source.
void soft_update(MlpParams& target, const MlpParams& source, double tau);

}  // namespace drnd

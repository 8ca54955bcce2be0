#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "velatt/matrix.hpp"

namespace velatt {

enum class Activation { tanh, relu };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::tanh;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Parameters (or gradients) of an MLP: one dense layer per consecutive pair
/// of layer sizes. Hidden layers apply the activation; the last is affine.
struct MlpParams {
  std::vector<DenseLayer> layers;

  /// Zero-filled parameters shaped like `spec`.
  static MlpParams zeros_like(const MlpSpec& spec);

  std::size_t parameter_count() const;
  /// Visits every scalar in a fixed order (layer, weights row-major, bias).
  template <typename F>
  void for_each(F&& f) {
    for (auto& layer : layers) {
      for (double& w : layer.weights.data()) f(w);
      for (double& b : layer.bias) f(b);
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& layer : layers) {
      for (double w : layer.weights.data()) f(w);
      for (double b : layer.bias) f(b);
    }
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// Draws come from mt19937_64 mapped to [0, 1) with 53-bit resolution, so the
/// result is identical on every conforming platform.
MlpParams init(const MlpSpec& spec);

double init_bound(std::size_t fan_in, std::size_t fan_out);

std::vector<double> forward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x);

struct Gradients {
  MlpParams params;
  std::vector<double> input;
};

/// Reverse-mode gradients of <upstream, forward(x)> with respect to the
/// parameters and the input.
Gradients backward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x,
                   std::span<const double> upstream);

/// Adds the parameter gradient of one sample into `accum` (must be shaped like params).
void accumulate_backward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x,
                         std::span<const double> upstream, MlpParams& accum);

/// SGD with classical momentum: v = mu v + g; p -= lr v.
struct OptimState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  MlpParams velocity;
  std::uint64_t step = 0;

  static OptimState for_params(const MlpParams& params, double learning_rate = 1e-3,
                               double momentum = 0.9);
};

void sgd_step(MlpParams& params, const MlpParams& grads, OptimState& opt);

/// Text checkpoint: a version line, the spec, then every parameter as a
/// C99 hex float so load(save(p)) == p bit for bit.
void save_checkpoint(const MlpSpec& spec, const MlpParams& params, std::ostream& out);
void save_checkpoint(const MlpSpec& spec, const MlpParams& params, const std::filesystem::path& path);

struct Checkpoint {
  MlpSpec spec;
  MlpParams params;
};

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace velatt

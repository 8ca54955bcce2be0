#include "velatt/tinynet.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "velatt/error.hpp"

namespace velatt {

std::string_view to_string(Activation activation) {
  return activation == Activation::tanh ? "tanh" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ValidationError("MLP needs at least an input and an output layer");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ValidationError("MLP layer sizes must be positive");
  }
}

MlpParams MlpParams::zeros_like(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    p.layers.push_back({Matrix(spec.layer_sizes[l + 1], spec.layer_sizes[l]),
                        std::vector<double>(spec.layer_sizes[l + 1], 0.0)});
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

double init_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

MlpParams init(const MlpSpec& spec) {
  MlpParams p = MlpParams::zeros_like(spec);
  std::mt19937_64 rng(spec.seed);
  for (auto& layer : p.layers) {
    const double bound = init_bound(layer.weights.cols(), layer.weights.rows());
    for (double& w : layer.weights.data()) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
      w = (2.0 * u - 1.0) * bound;
    }
  }
  return p;
}

namespace {

void check_params(const MlpSpec& spec, const MlpParams& params) {
  spec.validate();
  if (params.layers.size() + 1 != spec.layer_sizes.size()) {
    throw ValidationError("parameters do not match the MLP spec");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    if (layer.weights.cols() != spec.layer_sizes[l] || layer.weights.rows() != spec.layer_sizes[l + 1] ||
        layer.bias.size() != spec.layer_sizes[l + 1]) {
      throw ValidationError("layer " + std::to_string(l) + " shape does not match the MLP spec");
    }
  }
}

double activate(Activation a, double z) { return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0); }

// Derivative expressed through the activation output h (tanh) or input z (relu).
double activate_grad(Activation a, double z, double h) {
  return a == Activation::tanh ? 1.0 - h * h : (z > 0.0 ? 1.0 : 0.0);
}

struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input of each layer
  std::vector<std::vector<double>> pre;     // affine output of each layer
  std::vector<double> output;
};

ForwardCache run_forward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x) {
  if (x.size() != spec.input_size()) {
    throw ValidationError("MLP input has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(spec.input_size()));
  }
  ForwardCache cache;
  std::vector<double> h(x.begin(), x.end());
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    std::vector<double> z(layer.bias);
    for (std::size_t o = 0; o < z.size(); ++o) {
      const auto row = layer.weights.row(o);
      double acc = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * h[i];
      z[o] += acc;
    }
    cache.inputs.push_back(std::move(h));
    h = z;
    if (l != last) {
      for (double& v : h) v = activate(spec.activation, v);
    }
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(h);
  return cache;
}

// Backpropagates `upstream` and adds parameter gradients into `accum`;
// returns the input gradient.
std::vector<double> run_backward(const MlpSpec& spec, const MlpParams& params, const ForwardCache& cache,
                                 std::span<const double> upstream, MlpParams& accum) {
  if (upstream.size() != spec.output_size()) {
    throw ValidationError("upstream gradient has " + std::to_string(upstream.size()) +
                          " entries, expected " + std::to_string(spec.output_size()));
  }
  std::vector<double> delta(upstream.begin(), upstream.end());  // d/d(pre) of current layer
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& g = accum.layers[l];
    const auto& in = cache.inputs[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const double d = delta[o];
      g.bias[o] += d;
      auto grow = g.weights.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) grow[i] += d * in[i];
    }
    std::vector<double> prev(in.size(), 0.0);
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const auto row = layer.weights.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) prev[i] += row[i] * delta[o];
    }
    if (l > 0) {
      // `in` is the activation output of layer l-1.
      const auto& z = cache.pre[l - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= activate_grad(spec.activation, z[i], in[i]);
    }
    delta = std::move(prev);
  }
  return delta;
}

}  // namespace

std::vector<double> forward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x) {
  check_params(spec, params);
  return run_forward(spec, params, x).output;
}

Gradients backward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x,
                   std::span<const double> upstream) {
  check_params(spec, params);
  Gradients g{MlpParams::zeros_like(spec), {}};
  const auto cache = run_forward(spec, params, x);
  g.input = run_backward(spec, params, cache, upstream, g.params);
  return g;
}

void accumulate_backward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x,
                         std::span<const double> upstream, MlpParams& accum) {
  const auto cache = run_forward(spec, params, x);
  run_backward(spec, params, cache, upstream, accum);
}

OptimState OptimState::for_params(const MlpParams& params, double learning_rate, double momentum) {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  OptimState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  s.velocity = params;
  s.velocity.for_each([](double& v) { v = 0.0; });
  return s;
}

void sgd_step(MlpParams& params, const MlpParams& grads, OptimState& opt) {
  if (grads.layers.size() != params.layers.size() || opt.velocity.layers.size() != params.layers.size()) {
    throw ValidationError("optimizer state does not match parameters");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    auto& v = opt.velocity.layers[l];
    if (!p.weights.same_shape(g.weights) || !p.weights.same_shape(v.weights) || p.bias.size() != g.bias.size()) {
      throw ValidationError("gradient shape does not match parameters");
    }
    auto update = [&](double& param, double grad, double& vel) {
      vel = opt.momentum * vel + grad;
      param -= opt.learning_rate * vel;
    };
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      update(p.weights.data()[i], g.weights.data()[i], v.weights.data()[i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) update(p.bias[i], g.bias[i], v.bias[i]);
  }
  ++opt.step;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kCheckpointMagic = "velatt-mlp 1";

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& token) {
  std::string_view s = token;
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad number '" + token + "' in checkpoint", 0);
  return negative ? -v : v;
}

}  // namespace

void save_checkpoint(const MlpSpec& spec, const MlpParams& params, std::ostream& out) {
  check_params(spec, params);
  out << kCheckpointMagic << '\n';
  out << "activation " << to_string(spec.activation) << '\n';
  out << "seed " << spec.seed << '\n';
  out << "layers";
  for (std::size_t s : spec.layer_sizes) out << ' ' << s;
  out << '\n';
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out << "weights " << l;
    for (double w : layer.weights.data()) out << ' ' << hexfloat(w);
    out << "\nbias " << l;
    for (double b : layer.bias) out << ' ' << hexfloat(b);
    out << '\n';
  }
}

void save_checkpoint(const MlpSpec& spec, const MlpParams& params, const std::filesystem::path& path) {
  std::ostringstream buffer;
  save_checkpoint(spec, params, buffer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << buffer.str();
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw ParseError("not a velatt checkpoint (bad header)", 1);
  }
  Checkpoint ck;
  std::string key;
  auto expect = [&](const char* name, std::size_t lineno) {
    if (!std::getline(in, line)) throw ParseError(std::string("missing '") + name + "' line", lineno);
    std::istringstream ls(line);
    ls >> key;
    if (key != name) throw ParseError(std::string("expected '") + name + "'", lineno);
    return ls;
  };
  {
    auto ls = expect("activation", 2);
    std::string name;
    ls >> name;
    ck.spec.activation = parse_activation(name);
  }
  {
    auto ls = expect("seed", 3);
    if (!(ls >> ck.spec.seed)) throw ParseError("bad seed", 3);
  }
  {
    auto ls = expect("layers", 4);
    std::size_t s = 0;
    while (ls >> s) ck.spec.layer_sizes.push_back(s);
  }
  ck.spec.validate();
  ck.params = MlpParams::zeros_like(ck.spec);
  std::size_t lineno = 4;
  for (std::size_t l = 0; l < ck.params.layers.size(); ++l) {
    auto read_values = [&](const char* name, std::span<double> dst) {
      auto ls = expect(name, ++lineno);
      std::size_t index = 0;
      if (!(ls >> index) || index != l) throw ParseError("layer index mismatch", lineno);
      std::string token;
      std::size_t i = 0;
      while (ls >> token) {
        if (i >= dst.size()) throw ParseError("too many values", lineno);
        dst[i++] = parse_hexfloat(token);
      }
      if (i != dst.size()) throw ParseError("too few values", lineno);
    };
    read_values("weights", ck.params.layers[l].weights.data());
    read_values("bias", ck.params.layers[l].bias);
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace velatt

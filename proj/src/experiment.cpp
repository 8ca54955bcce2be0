#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <set>

#include "rng.hpp"
#include "velatt/error.hpp"
#include "velatt/metrics.hpp"
#include "velatt/objectives.hpp"
#include "velatt/synth_bench.hpp"
#include "velatt/velocity.hpp"

namespace velatt {

namespace {

struct Sample {
  Matrix states;   // T x state_dim
  Matrix actions;  // T x D
  std::vector<double> weights;
};

std::vector<Sample> prepare_samples(const Dataset& train, const std::optional<WeightingConfig>& weighting,
                                    const DimMask& mask, std::span<const double> scale) {
  std::vector<Sample> samples;
  samples.reserve(train.size());
  for (const auto& raw : train.trajectories) {
    const Trajectory traj = scale_actions(raw, scale);
    if (!traj.states) throw ValidationError("trajectory '" + traj.id + "' has no states to train on");
    Sample s;
    const std::size_t sdim = traj.states->front().size();
    s.states = Matrix(traj.length(), sdim);
    for (std::size_t t = 0; t < traj.length(); ++t) {
      for (std::size_t d = 0; d < sdim; ++d) s.states(t, d) = (*traj.states)[t][d];
    }
    s.actions = traj.action_matrix();
    if (weighting) s.weights = weight_profile(compute_velocity(traj, mask), *weighting).values;
    samples.push_back(std::move(s));
  }
  return samples;
}

void standardize(std::vector<Sample>& samples, std::vector<double>& mean, std::vector<double>& std) {
  const std::size_t dim = mean.size();
  std::size_t n = 0;
  std::vector<double> sum(dim, 0.0);
  for (const auto& s : samples) {
    if (s.states.cols() != dim) throw ValidationError("training states have mixed dimensions");
    for (std::size_t t = 0; t < s.states.rows(); ++t) {
      for (std::size_t d = 0; d < dim; ++d) sum[d] += s.states(t, d);
    }
    n += s.states.rows();
  }
  for (std::size_t d = 0; d < dim; ++d) mean[d] = sum[d] / static_cast<double>(n);
  std::vector<double> ss(dim, 0.0);
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.states.rows(); ++t) {
      for (std::size_t d = 0; d < dim; ++d) ss[d] += (s.states(t, d) - mean[d]) * (s.states(t, d) - mean[d]);
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double sd = std::sqrt(ss[d] / static_cast<double>(n));
    std[d] = sd > 1e-12 ? sd : 1.0;
  }
  for (auto& s : samples) {
    for (std::size_t t = 0; t < s.states.rows(); ++t) {
      for (std::size_t d = 0; d < dim; ++d) s.states(t, d) = (s.states(t, d) - mean[d]) / std[d];
    }
  }
}

// First layer absorbs x -> (x - mean) / std.
void fold_input_standardization(MlpParams& params, std::span<const double> mean, std::span<const double> std) {
  DenseLayer& first = params.layers.front();
  for (std::size_t r = 0; r < first.weights.rows(); ++r) {
    auto w = first.weights.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) {
      w[c] /= std[c];
      first.bias[r] -= w[c] * mean[c];
    }
  }
}

// Output layer absorbs the action scale so the policy emits raw actions.
void fold_output_scale(MlpParams& params, std::span<const double> scale) {
  DenseLayer& last = params.layers.back();
  for (std::size_t r = 0; r < last.weights.rows(); ++r) {
    for (double& w : last.weights.row(r)) w *= scale[r];
    last.bias[r] *= scale[r];
  }
}

}  // namespace

std::vector<double> action_scale(const Dataset& ds) {
  std::vector<double> scale(ds.action_dim, 0.0);
  for (const auto& traj : ds.trajectories) {
    for (const auto& a : traj.actions) {
      for (std::size_t d = 0; d < scale.size(); ++d) scale[d] = std::max(scale[d], std::abs(a[d]));
    }
  }
  for (double& s : scale) {
    if (s == 0.0) s = 1.0;
  }
  return scale;
}

Trajectory scale_actions(const Trajectory& traj, std::span<const double> scale) {
  if (scale.size() != traj.action_dim()) throw ValidationError("action scale has the wrong dimension");
  Trajectory out = traj;
  for (auto& a : out.actions) {
    for (std::size_t d = 0; d < a.size(); ++d) a[d] /= scale[d];
  }
  return out;
}

TrainResult train_policy(const Dataset& train, const std::optional<WeightingConfig>& weighting,
                         const TrainConfig& config, std::uint64_t seed) {
  if (train.empty()) throw ValidationError("training set is empty");
  train.validate();
  if (weighting) weighting->validate();
  if (config.steps == 0 || config.batch_trajectories == 0) {
    throw ValidationError("training needs positive steps and batch size");
  }
  const DimMask mask = config.mask.value_or(DimMask::default_for(train.action_dim));
  mask.check_fits(train.action_dim);
  TrainResult result;
  result.action_scale =
      config.normalize_actions ? action_scale(train) : std::vector<double>(train.action_dim, 1.0);
  std::vector<Sample> samples = prepare_samples(train, weighting, mask, result.action_scale);
  const std::size_t sdim = samples.front().states.cols();
  std::vector<double> in_mean(sdim, 0.0);
  std::vector<double> in_std(sdim, 1.0);
  if (config.normalize_inputs) standardize(samples, in_mean, in_std);

  MlpSpec& spec = result.policy.spec;
  spec.layer_sizes.push_back(samples.front().states.cols());
  for (std::size_t h : config.hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(train.action_dim);
  spec.activation = config.activation;
  spec.seed = seed;
  for (const auto& s : samples) {
    if (s.states.cols() != spec.input_size()) throw ValidationError("training states have mixed dimensions");
  }
  MlpParams& params = result.policy.params;
  params = init(spec);
  OptimState opt = OptimState::for_params(params, config.learning_rate, config.momentum);

  detail::Rng rng(detail::splitmix64(seed ^ 0x5eedULL));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::size_t batch = std::min(config.batch_trajectories, samples.size());
  const double inv_batch = 1.0 / static_cast<double>(batch);

  MlpParams grads = MlpParams::zeros_like(spec);
  result.losses.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    grads.for_each([](double& g) { g = 0.0; });
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      const Sample& s = samples[order[cursor++]];
      Matrix pred(s.actions.rows(), s.actions.cols());
      for (std::size_t t = 0; t < s.states.rows(); ++t) {
        const auto out = forward(spec, params, s.states.row(t));
        std::copy(out.begin(), out.end(), pred.row(t).begin());
      }
      const LossValue lv = weighting ? weighted_l1(pred, s.actions, s.weights) : unweighted_l1(pred, s.actions);
      loss += lv.value * inv_batch;
      std::vector<double> upstream(s.actions.cols());
      for (std::size_t t = 0; t < s.states.rows(); ++t) {
        const auto g = lv.grad.row(t);
        for (std::size_t d = 0; d < upstream.size(); ++d) upstream[d] = g[d] * inv_batch;
        accumulate_backward(spec, params, s.states.row(t), upstream, grads);
      }
    }
    if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss", step);
    result.losses.push_back(loss);
    const double progress = static_cast<double>(step) / static_cast<double>(config.steps);
    opt.learning_rate = config.learning_rate * (1.0 - (1.0 - config.final_lr_fraction) * progress);
    sgd_step(params, grads, opt);
  }
  if (config.normalize_inputs) fold_input_standardization(params, in_mean, in_std);
  if (config.normalize_actions) fold_output_scale(params, result.action_scale);
  return result;
}

double SeedOutcome::success_rate() const {
  const auto ok = static_cast<std::size_t>(
      std::count_if(rollouts.begin(), rollouts.end(), [](const RolloutResult& r) { return r.success; }));
  return velatt::success_rate(ok, rollouts.size());
}

double SeedOutcome::mean_place_error() const {
  if (rollouts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rollouts) sum += r.final_place_error;
  return sum / static_cast<double>(rollouts.size());
}

double SeedOutcome::tracking_error(bool slow) const {
  double sum = 0.0;
  std::size_t steps = 0;
  for (const auto& r : rollouts) {
    for (const auto& [phase, err] : r.per_phase_error) {
      if (is_slow(phase) != slow) continue;
      const std::size_t n = r.per_phase_steps.at(phase);
      sum += err * static_cast<double>(n);
      steps += n;
    }
  }
  return steps ? sum / static_cast<double>(steps) : 0.0;
}

std::vector<double> ExperimentResult::task_success_rates() const {
  std::vector<double> rates;
  for (const auto& task : tasks) {
    double sum = 0.0;
    for (const auto& seed : seeds) {
      std::size_t ok = 0;
      std::size_t n = 0;
      for (const auto& r : seed.rollouts) {
        if (r.trajectory.meta.count("task") && r.trajectory.meta.at("task") != task) continue;
        ++n;
        ok += r.success ? 1 : 0;
      }
      sum += success_rate(ok, n);
    }
    rates.push_back(sum / static_cast<double>(seeds.size()));
  }
  return rates;
}

std::vector<double> ExperimentResult::seed_success_rates() const {
  std::vector<double> out;
  for (const auto& s : seeds) out.push_back(s.success_rate());
  return out;
}

double ExperimentResult::mean_place_error() const {
  double sum = 0.0;
  for (const auto& s : seeds) sum += s.mean_place_error();
  return seeds.empty() ? 0.0 : sum / static_cast<double>(seeds.size());
}

double ExperimentResult::tracking_error(bool slow) const {
  double sum = 0.0;
  for (const auto& s : seeds) sum += s.tracking_error(slow);
  return seeds.empty() ? 0.0 : sum / static_cast<double>(seeds.size());
}

std::string method_name(const std::optional<WeightingConfig>& weighting) {
  if (!weighting) return "uniform";
  char buf[64];
  std::snprintf(buf, sizeof buf, "@clip%g", weighting->clip_max);
  return std::string(to_string(weighting->strategy)) + buf;
}

ExperimentResult run_experiment(const std::optional<WeightingConfig>& weighting, const Dataset& train,
                                std::span<const TaskSpec> eval_specs, const TrainConfig& config,
                                std::span<const std::uint64_t> seeds, std::size_t threads) {
  if (eval_specs.empty()) throw ValidationError("no evaluation tasks");
  if (seeds.empty()) throw ValidationError("no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds must be distinct");
  }
  for (const auto& spec : eval_specs) spec.validate();

  ExperimentResult result;
  result.method = method_name(weighting);
  result.weighting = weighting;
  for (const auto& spec : eval_specs) {
    if (std::find(result.tasks.begin(), result.tasks.end(), spec.name) == result.tasks.end()) {
      result.tasks.push_back(spec.name);
    }
  }

  auto run_seed = [&](std::uint64_t seed) {
    SeedOutcome out;
    out.seed = seed;
    TrainResult trained = train_policy(train, weighting, config, seed);
    out.losses = std::move(trained.losses);
    out.policy = std::move(trained.policy);
    for (const auto& spec : eval_specs) {
      RolloutResult r = rollout(out.policy, spec, spec.max_steps);
      r.trajectory.meta["task"] = spec.name;
      out.rollouts.push_back(std::move(r));
    }
    return out;
  };

  std::vector<SeedOutcome> outcomes(seeds.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, seeds.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) outcomes[i] = run_seed(seeds[i]);
  } else {
    for (std::size_t start = 0; start < seeds.size(); start += workers) {
      std::vector<std::future<SeedOutcome>> jobs;
      const std::size_t end = std::min(seeds.size(), start + workers);
      for (std::size_t i = start; i < end; ++i) jobs.push_back(std::async(std::launch::async, run_seed, seeds[i]));
      for (std::size_t i = start; i < end; ++i) outcomes[i] = jobs[i - start].get();
    }
  }
  std::sort(outcomes.begin(), outcomes.end(), [](const SeedOutcome& a, const SeedOutcome& b) { return a.seed < b.seed; });
  result.seeds = std::move(outcomes);
  return result;
}

}  // namespace velatt

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "velatt/metrics.hpp"
#include "velatt/synth_bench.hpp"
#include "velatt/weighting.hpp"

namespace velatt {

/// Everything needed to reproduce a training run or an ablation sweep.
/// Serialized as JSON with one object per section:
///
///   task      TaskSpec fields (template for training and evaluation)
///   data      n_train, seed
///   weighting strategy ("none" for the unweighted baseline), alpha,
///             eps_floor, clip_max, normalize
///   training  hidden, activation, steps, batch_trajectories, learning_rate,
///             momentum, final_lr_fraction, mask, normalize_actions,
///             normalize_inputs
///   eval      n_episodes, seed, max_steps
///   seeds     list of training seeds
///   sweep     optional {strategies: [...], clip_max: [...]}; replaces weighting
///   reference optional method name used for SR-I / RER-R
///   threads   worker threads (not part of the echoed config)
///
/// Missing keys keep their defaults; unknown keys are rejected.
struct ExperimentConfig {
  TaskSpec task;
  std::size_t n_train = 50;
  std::uint64_t data_seed = 1;
  std::optional<WeightingConfig> weighting = WeightingConfig{};
  TrainConfig training;
  std::size_t n_eval = 50;
  std::uint64_t eval_seed = 2;
  std::size_t eval_max_steps = 200;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};

  struct Sweep {
    std::vector<std::optional<Strategy>> strategies;  // nullopt is the unweighted baseline
    std::vector<double> clip_max;

    friend bool operator==(const Sweep&, const Sweep&) = default;
  };
  std::optional<Sweep> sweep;
  std::string reference;
  std::size_t threads = 1;

  void validate() const;

  /// Weighting of every report row, in row order.
  std::vector<std::optional<WeightingConfig>> cells() const;

  /// Canonical JSON text without the `threads` key.
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentRun {
  EvalReport report;
  std::vector<ExperimentResult> results;  // one per cell
};

/// Generates the training set, evaluation specs, runs every cell and
/// collects an EvalReport with the config echoed.
ExperimentRun run_configured(const ExperimentConfig& config);

/// Evaluation specs for a config: n_eval samples around the task template.
std::vector<TaskSpec> eval_specs_for(const ExperimentConfig& config);

}  // namespace velatt

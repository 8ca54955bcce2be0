#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "velatt/tinynet.hpp"
#include "velatt/trajectory.hpp"
#include "velatt/weighting.hpp"

namespace velatt {

using Vec3 = std::array<double, 3>;

/// Pick-and-place phases. Speed switches by proximity to the current target.
enum class Phase : int { approach_fast = 0, align_slow = 1, transport_fast = 2, place_slow = 3 };

inline constexpr Phase kAllPhases[] = {Phase::approach_fast, Phase::align_slow, Phase::transport_fast,
                                       Phase::place_slow};

std::string_view to_string(Phase phase);
inline bool is_slow(Phase phase) { return phase == Phase::align_slow || phase == Phase::place_slow; }

struct Box {
  Vec3 lo{0.3, -0.25, 0.0};
  Vec3 hi{0.7, 0.25, 0.3};
  bool contains(const Vec3& p) const;

  friend bool operator==(const Box&, const Box&) = default;
};

// Action layout: dx dy dz (m per step), three rotation deltas (zero here),
// gripper command in [0, 1]. The gripper closes when the command rises above
// 0.5 and opens when it falls below 0.5.
inline constexpr std::size_t kActionDim = 7;
inline constexpr std::size_t kGripperDim = 6;
// Policy input: ee position (3), gripper closed (1), object position (3), goal (3).
inline constexpr std::size_t kStateDim = 10;

struct TaskSpec {
  std::string name = "pick_place";
  Box workspace;
  Vec3 ee_start{0.5, 0.0, 0.25};
  Vec3 object_start{0.4, -0.15, 0.02};
  Vec3 goal{0.6, 0.15, 0.02};
  double grasp_tolerance = 0.02;
  double place_tolerance = 0.02;
  double baseline_speed = 0.03;
  double slow_factor = 1.0 / 3.0;
  /// Slow zones extend proximity_factor * tolerance around object and goal.
  double proximity_factor = 3.0;
  double noise_sigma = 0.002;
  std::size_t max_steps = 200;
  std::uint64_t seed = 0;

  double slow_speed() const { return baseline_speed * slow_factor; }
  double grasp_zone() const { return proximity_factor * grasp_tolerance; }
  double place_zone() const { return proximity_factor * place_tolerance; }

  /// Points inside the workspace, positive tolerances and speeds,
  /// slow_factor in (0, 1], slow speed < both tolerances (so the expert can
  /// always stop within half a tolerance) and slow zones >= baseline speed.
  void validate() const;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Point-mass kinematic world shared by the expert generator and rollouts.
struct SimState {
  Vec3 ee{};
  bool gripper_closed = false;
  Vec3 object{};
  bool attached = false;
  bool released = false;

  static SimState initial(const TaskSpec& spec);
  std::vector<double> encode(const TaskSpec& spec) const;
};

/// Applies one action: translate the end effector (and a held object), then
/// act on the gripper command. Closing within grasp_tolerance attaches the
/// object; opening while holding releases it.
void apply_action(SimState& state, std::span<const double> action, const TaskSpec& spec);

/// Noise-free expert command for the current state and the phase it belongs to.
/// The gripper command is 0 while approaching and 1 while transporting; in the
/// slow zones it ramps with the remaining distance and crosses 0.5 at half the
/// grasp (or place) tolerance, which is where the expert closes (or releases).
struct ExpertCommand {
  std::array<double, kActionDim> action{};
  Phase phase = Phase::approach_fast;
};
ExpertCommand expert_command(const SimState& state, const TaskSpec& spec);

struct ExpertDemo {
  Trajectory trajectory;  // actions, encoded states, meta
  std::vector<Phase> phases;
};

/// Deterministic (from spec.seed) expert demonstration. Throws ValidationError
/// when the goal cannot be reached within spec.max_steps.
ExpertDemo generate_expert(const TaskSpec& spec);

/// Per-step phase labels stored by generate_expert in meta["phases"].
std::vector<Phase> phases_of(const Trajectory& traj);

/// Specs with object and goal sampled uniformly over the workspace's x/y
/// extent at the template's heights (both rest on the table), each with its
/// own derived seed.
std::vector<TaskSpec> sample_task_specs(const TaskSpec& spec_template, std::size_t n, std::uint64_t seed);

Dataset make_dataset(const TaskSpec& spec_template, std::size_t n, std::uint64_t seed);

struct Policy {
  MlpSpec spec;
  MlpParams params;
};

struct RolloutResult {
  Trajectory trajectory;
  bool success = false;
  bool aborted_non_finite = false;
  double final_place_error = 0.0;
  /// Mean translational distance between the policy action and the expert
  /// command at the visited state, by expert phase. Phases never visited are absent.
  std::map<Phase, double> per_phase_error;
  std::map<Phase, std::size_t> per_phase_steps;
};

RolloutResult rollout(const Policy& policy, const TaskSpec& spec, std::size_t max_steps);

/// Open-loop replay of recorded actions through the same simulator.
RolloutResult replay(std::span<const ActionVector> actions, const TaskSpec& spec, std::size_t max_steps);

// ---------------------------------------------------------------------------
// Behaviour cloning harness

struct TrainConfig {
  std::vector<std::size_t> hidden{128, 128};
  Activation activation = Activation::relu;
  std::size_t steps = 3000;
  std::size_t batch_trajectories = 8;
  double learning_rate = 0.1;
  double momentum = 0.9;
  /// Learning rate decays linearly to learning_rate * final_lr_fraction at the last step.
  double final_lr_fraction = 0.01;
  /// Velocity mask; defaults to DimMask::default_for(action_dim).
  std::optional<DimMask> mask;
  /// Train on actions divided per dimension by their largest magnitude in the
  /// training set. Velocities (and therefore weights) are computed in these
  /// units; the scale is folded back into the output layer afterwards.
  bool normalize_actions = true;
  /// Standardize policy inputs with training-set mean and std; folded into
  /// the first layer after training.
  bool normalize_inputs = true;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainResult {
  Policy policy;
  std::vector<double> losses;  // one per optimizer step
  std::vector<double> action_scale;
};

/// Per-dimension max |a_d| over the dataset; dimensions that never move get 1.
std::vector<double> action_scale(const Dataset& ds);

/// Copy of `traj` with every action divided elementwise by `scale`.
Trajectory scale_actions(const Trajectory& traj, std::span<const double> scale);

/// Behaviour cloning with weighted_l1 under `weighting`, or unweighted_l1 when
/// `weighting` is empty. Throws DivergenceError on a non-finite loss.
TrainResult train_policy(const Dataset& train, const std::optional<WeightingConfig>& weighting,
                         const TrainConfig& config, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<double> losses;
  std::vector<RolloutResult> rollouts;
  Policy policy;

  double success_rate() const;
  double mean_place_error() const;
  /// Step-weighted mean tracking error over slow (or fast) phases.
  double tracking_error(bool slow) const;
};

struct ExperimentResult {
  std::string method;
  std::optional<WeightingConfig> weighting;
  std::vector<std::string> tasks;  // distinct eval task names, first-seen order
  std::vector<SeedOutcome> seeds;  // sorted by seed

  /// Success rate (percent) per task, averaged over seeds.
  std::vector<double> task_success_rates() const;
  std::vector<double> seed_success_rates() const;
  double mean_place_error() const;
  double tracking_error(bool slow) const;
};

std::string method_name(const std::optional<WeightingConfig>& weighting);

/// Trains one policy per seed and rolls it out on every eval spec. Seeds may
/// run on up to `threads` threads; the result does not depend on it.
ExperimentResult run_experiment(const std::optional<WeightingConfig>& weighting, const Dataset& train,
                                std::span<const TaskSpec> eval_specs, const TrainConfig& config,
                                std::span<const std::uint64_t> seeds, std::size_t threads = 1);

}  // namespace velatt

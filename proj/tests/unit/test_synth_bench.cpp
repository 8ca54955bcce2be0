#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "velatt/error.hpp"
#include "velatt/synth_bench.hpp"
#include "velatt/velocity.hpp"

using namespace velatt;

namespace {

TaskSpec noiseless() {
  TaskSpec s;
  s.noise_sigma = 0.0;
  return s;
}

double speed(const ActionVector& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

TrainConfig tiny_training() {
  TrainConfig c;
  c.hidden = {16};
  c.steps = 30;
  c.batch_trajectories = 4;
  return c;
}

}  // namespace

TEST_CASE("task validation") {
  CHECK_NOTHROW(TaskSpec{}.validate());
  TaskSpec bad = TaskSpec{};
  bad.goal = {2.0, 0.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = TaskSpec{};
  bad.slow_factor = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  // A slow step as long as the tolerance could skip over the grasp radius.
  bad = TaskSpec{};
  bad.slow_factor = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.grasp_tolerance = bad.place_tolerance = 0.04;
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("noise-free expert moves at exactly two speeds") {
  const ExpertDemo demo = generate_expert(noiseless());
  REQUIRE(demo.phases.size() == demo.trajectory.length());
  bool seen[4] = {};
  for (std::size_t t = 0; t < demo.phases.size(); ++t) {
    seen[static_cast<int>(demo.phases[t])] = true;
    const double v = speed(demo.trajectory.actions[t]);
    if (is_slow(demo.phases[t])) {
      CHECK(v == doctest::Approx(0.01).epsilon(1e-12));
    } else {
      CHECK(v == doctest::Approx(0.03).epsilon(1e-12));
    }
  }
  for (bool s : seen) CHECK(s);
  CHECK(phases_of(demo.trajectory) == demo.phases);
  CHECK(demo.trajectory.meta.at("task") == "pick_place");
}

TEST_CASE("phases come in order and the gripper closes and opens once") {
  const ExpertDemo demo = generate_expert(TaskSpec{});
  for (std::size_t t = 1; t < demo.phases.size(); ++t) CHECK(demo.phases[t] >= demo.phases[t - 1]);
  int switches = 0;
  bool closed = false;
  for (const auto& a : demo.trajectory.actions) {
    CHECK(a[kGripperDim] >= 0.0);
    CHECK(a[kGripperDim] <= 1.0);
    for (int i = 3; i < 6; ++i) CHECK(a[i] == 0.0);
    if ((a[kGripperDim] > 0.5) != closed) {
      closed = !closed;
      ++switches;
    }
  }
  CHECK(switches == 2);
}

TEST_CASE("single-speed protocol") {
  TaskSpec s = noiseless();
  s.slow_factor = 1.0;
  s.grasp_tolerance = s.place_tolerance = 0.04;
  const ExpertDemo demo = generate_expert(s);
  const auto v = compute_velocity(demo.trajectory, DimMask::range(0, 3)).values;
  for (double x : v) CHECK(x == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("expert replay succeeds within half the place tolerance") {
  for (const TaskSpec& spec : sample_task_specs(TaskSpec{}, 10, 5)) {
    const ExpertDemo demo = generate_expert(spec);
    const RolloutResult r = replay(demo.trajectory.actions, spec, spec.max_steps);
    CHECK(r.success);
    CHECK(r.final_place_error <= spec.place_tolerance / 2);
    CHECK(r.trajectory.actions == demo.trajectory.actions);
  }
}

TEST_CASE("zero policy never grasps") {
  const TaskSpec spec;
  Policy zero{MlpSpec{{kStateDim, 4, kActionDim}, Activation::tanh, 0}, {}};
  zero.params = MlpParams::zeros_like(zero.spec);
  const RolloutResult r = rollout(zero, spec, 50);
  CHECK_FALSE(r.success);
  CHECK(r.trajectory.length() == 50);
  CHECK(r.per_phase_steps.at(Phase::approach_fast) == 50);
  CHECK(r.per_phase_error.at(Phase::approach_fast) == doctest::Approx(0.03));

  Policy wrong{MlpSpec{{3, kActionDim}, Activation::tanh, 0}, {}};
  wrong.params = MlpParams::zeros_like(wrong.spec);
  CHECK_THROWS_AS(rollout(wrong, spec, 10), ValidationError);
}

TEST_CASE("non-finite policy output aborts the episode") {
  Policy nan{MlpSpec{{kStateDim, kActionDim}, Activation::tanh, 0}, {}};
  nan.params = MlpParams::zeros_like(nan.spec);
  nan.params.layers[0].bias[0] = std::nan("");
  const RolloutResult r = rollout(nan, TaskSpec{}, 10);
  CHECK(r.aborted_non_finite);
  CHECK_FALSE(r.success);
}

TEST_CASE("datasets are deterministic") {
  const Dataset a = make_dataset(TaskSpec{}, 5, 9), b = make_dataset(TaskSpec{}, 5, 9);
  CHECK(same_content(a, b));
  CHECK(a.action_dim == kActionDim);
  CHECK_FALSE(same_content(a, make_dataset(TaskSpec{}, 5, 10)));
  CHECK(make_dataset(TaskSpec{}, 1, 9).size() == 1);
  CHECK(make_dataset(TaskSpec{}, 50, 1).size() == 50);
  CHECK_THROWS_AS(make_dataset(TaskSpec{}, 0, 1), ValidationError);
}

TEST_CASE("sampled tasks rest on the table inside the workspace") {
  const TaskSpec tmpl;
  for (const TaskSpec& s : sample_task_specs(tmpl, 20, 3)) {
    CHECK(s.object_start[2] == tmpl.object_start[2]);
    CHECK(s.goal[2] == tmpl.goal[2]);
    CHECK(tmpl.workspace.contains(s.object_start));
    CHECK(tmpl.workspace.contains(s.goal));
  }
}

TEST_CASE("action scaling") {
  const Dataset ds = make_dataset(TaskSpec{}, 3, 2);
  const auto scale = action_scale(ds);
  REQUIRE(scale.size() == kActionDim);
  CHECK(scale[3] == 1.0);  // rotation deltas never move
  CHECK(scale[kGripperDim] == doctest::Approx(1.0));
  const Trajectory scaled = scale_actions(ds.trajectories[0], scale);
  for (const auto& a : scaled.actions) {
    for (double x : a) CHECK(std::abs(x) <= 1.0);
  }
}

TEST_CASE("training is deterministic and the unit-clip run matches the unweighted one") {
  const Dataset train = make_dataset(TaskSpec{}, 6, 4);
  const TrainConfig cfg = tiny_training();
  const TrainResult a = train_policy(train, std::nullopt, cfg, 1);
  const TrainResult b = train_policy(train, std::nullopt, cfg, 1);
  CHECK(a.losses == b.losses);
  CHECK(a.policy.params == b.policy.params);
  CHECK(a.losses.size() == cfg.steps);

  WeightingConfig unit;
  unit.clip_max = 1.0;
  const TrainResult c = train_policy(train, unit, cfg, 1);
  CHECK(c.losses == a.losses);
  CHECK(c.policy.params == a.policy.params);

  const TrainResult d = train_policy(train, WeightingConfig{}, cfg, 1);
  CHECK(d.losses != a.losses);
}

TEST_CASE("policies emit raw actions with or without normalization") {
  const Dataset train = make_dataset(TaskSpec{}, 4, 8);
  TrainConfig cfg = tiny_training();
  const TrainResult folded = train_policy(train, std::nullopt, cfg, 3);
  cfg.normalize_inputs = false;
  cfg.normalize_actions = false;
  const TrainResult raw = train_policy(train, std::nullopt, cfg, 3);
  // Both policies emit raw-unit actions of the right size for the benchmark state.
  const auto state = SimState::initial(TaskSpec{}).encode(TaskSpec{});
  CHECK(forward(folded.policy.spec, folded.policy.params, state).size() == kActionDim);
  CHECK(forward(raw.policy.spec, raw.policy.params, state).size() == kActionDim);
  CHECK(raw.action_scale == std::vector<double>(kActionDim, 1.0));
}

TEST_CASE("divergence is reported with its step") {
  const Dataset train = make_dataset(TaskSpec{}, 4, 8);
  TrainConfig cfg = tiny_training();
  cfg.learning_rate = 1e300;
  cfg.momentum = 0.0;
  cfg.activation = Activation::relu;
  CHECK_THROWS_AS(train_policy(train, std::nullopt, cfg, 0), DivergenceError);
}

TEST_CASE("experiments are deterministic across thread counts") {
  const Dataset train = make_dataset(TaskSpec{}, 6, 4);
  const auto specs = sample_task_specs(TaskSpec{}, 3, 2);
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const ExperimentResult seq = run_experiment(WeightingConfig{}, train, specs, tiny_training(), seeds, 1);
  const ExperimentResult par = run_experiment(WeightingConfig{}, train, specs, tiny_training(), seeds, 3);
  CHECK(seq.method == "inverse_squared@clip2");
  REQUIRE(seq.seeds.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(seq.seeds[i].seed == seeds[i]);
    CHECK(seq.seeds[i].losses == par.seeds[i].losses);
    CHECK(seq.seeds[i].policy.params == par.seeds[i].policy.params);
  }
  CHECK(seq.task_success_rates() == par.task_success_rates());
  CHECK(seq.tasks == std::vector<std::string>{"pick_place"});

  const std::vector<std::uint64_t> dup{1, 1};
  CHECK_THROWS_AS(run_experiment(std::nullopt, train, specs, tiny_training(), dup), ValidationError);
  CHECK_THROWS_AS(run_experiment(std::nullopt, train, specs, tiny_training(), std::vector<std::uint64_t>{}),
                  ValidationError);
}

TEST_CASE("method names") {
  CHECK(method_name(std::nullopt) == "uniform");
  WeightingConfig w;
  w.strategy = Strategy::log;
  w.clip_max = 10.0;
  CHECK(method_name(w) == "log@clip10");
  w.clip_max = 2.5;
  CHECK(method_name(w) == "log@clip2.5");
}

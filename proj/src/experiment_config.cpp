#include "velatt/experiment_config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "velatt/error.hpp"

namespace velatt {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ValidationError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Vec3 read_vec3(const json& j, const char* key, Vec3 fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw ValidationError(std::string("config key '") + key + "' needs 3 numbers");
  return {v[0], v[1], v[2]};
}

std::optional<Strategy> parse_strategy_or_none(const std::string& name) {
  if (name == "none") return std::nullopt;
  return parse_strategy(name);
}

TaskSpec task_from_json(const json& j) {
  check_keys(j,
             {"name", "workspace", "ee_start", "object_start", "goal", "grasp_tolerance", "place_tolerance",
              "baseline_speed", "slow_factor", "proximity_factor", "noise_sigma", "max_steps", "seed"},
             "task");
  TaskSpec t;
  read(j, "name", t.name);
  if (j.contains("workspace")) {
    const auto& w = j.at("workspace");
    check_keys(w, {"lo", "hi"}, "task.workspace");
    t.workspace.lo = read_vec3(w, "lo", t.workspace.lo);
    t.workspace.hi = read_vec3(w, "hi", t.workspace.hi);
  }
  t.ee_start = read_vec3(j, "ee_start", t.ee_start);
  t.object_start = read_vec3(j, "object_start", t.object_start);
  t.goal = read_vec3(j, "goal", t.goal);
  read(j, "grasp_tolerance", t.grasp_tolerance);
  read(j, "place_tolerance", t.place_tolerance);
  read(j, "baseline_speed", t.baseline_speed);
  read(j, "slow_factor", t.slow_factor);
  read(j, "proximity_factor", t.proximity_factor);
  read(j, "noise_sigma", t.noise_sigma);
  read(j, "max_steps", t.max_steps);
  read(j, "seed", t.seed);
  return t;
}

ojson task_to_json(const TaskSpec& t) {
  ojson j;
  j["name"] = t.name;
  j["workspace"] = {{"lo", t.workspace.lo}, {"hi", t.workspace.hi}};
  j["ee_start"] = t.ee_start;
  j["object_start"] = t.object_start;
  j["goal"] = t.goal;
  j["grasp_tolerance"] = t.grasp_tolerance;
  j["place_tolerance"] = t.place_tolerance;
  j["baseline_speed"] = t.baseline_speed;
  j["slow_factor"] = t.slow_factor;
  j["proximity_factor"] = t.proximity_factor;
  j["noise_sigma"] = t.noise_sigma;
  j["max_steps"] = t.max_steps;
  j["seed"] = t.seed;
  return j;
}

ojson weighting_to_json(const std::optional<WeightingConfig>& w) {
  ojson j;
  if (!w) {
    j["strategy"] = "none";
    return j;
  }
  j["strategy"] = std::string(to_string(w->strategy));
  j["alpha"] = w->alpha;
  j["eps_floor"] = w->eps_floor;
  j["clip_max"] = w->clip_max;
  j["normalize"] = w->normalize;
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  task.validate();
  if (n_train == 0) throw ValidationError("data.n_train must be positive");
  if (n_eval == 0) throw ValidationError("eval.n_episodes must be positive");
  if (eval_max_steps == 0) throw ValidationError("eval.max_steps must be positive");
  if (weighting) weighting->validate();
  if (training.steps == 0) throw ValidationError("training.steps must be positive");
  if (training.batch_trajectories == 0) throw ValidationError("training.batch_trajectories must be positive");
  if (!(training.learning_rate > 0.0)) throw ValidationError("training.learning_rate must be positive");
  if (!(training.momentum >= 0.0 && training.momentum < 1.0)) {
    throw ValidationError("training.momentum must lie in [0, 1)");
  }
  if (!(training.final_lr_fraction > 0.0 && training.final_lr_fraction <= 1.0)) {
    throw ValidationError("training.final_lr_fraction must lie in (0, 1]");
  }
  if (training.hidden.empty() ||
      std::any_of(training.hidden.begin(), training.hidden.end(), [](std::size_t h) { return h == 0; })) {
    throw ValidationError("training.hidden needs at least one positive layer width");
  }
  if (training.mask) training.mask->check_fits(kActionDim);
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds must be distinct");
  }
  if (sweep) {
    if (sweep->strategies.empty() || sweep->clip_max.empty()) {
      throw ValidationError("sweep needs at least one strategy and one clip_max");
    }
    for (double c : sweep->clip_max) {
      if (!(c >= 1.0)) throw ValidationError("sweep clip_max values must be >= 1");
    }
  }
  if (threads == 0) throw ValidationError("threads must be positive");
  if (!reference.empty()) {
    const auto all = cells();
    if (std::none_of(all.begin(), all.end(), [&](const auto& w) { return method_name(w) == reference; })) {
      throw ValidationError("reference '" + reference + "' does not name any run");
    }
  }
}

std::vector<std::optional<WeightingConfig>> ExperimentConfig::cells() const {
  if (!sweep) return {weighting};
  std::vector<std::optional<WeightingConfig>> out;
  const WeightingConfig base = weighting.value_or(WeightingConfig{});
  std::set<std::string> seen;
  for (const auto& s : sweep->strategies) {
    if (!s) {
      if (seen.insert(method_name(std::nullopt)).second) out.emplace_back(std::nullopt);
      continue;
    }
    for (double c : sweep->clip_max) {
      WeightingConfig w = base;
      w.strategy = *s;
      w.clip_max = c;
      if (seen.insert(method_name(w)).second) out.emplace_back(w);
    }
  }
  return out;
}

std::string ExperimentConfig::to_json() const {
  ojson j;
  j["task"] = task_to_json(task);
  j["data"] = {{"n_train", n_train}, {"seed", data_seed}};
  j["weighting"] = weighting_to_json(weighting);
  ojson tr;
  tr["hidden"] = training.hidden;
  tr["activation"] = std::string(to_string(training.activation));
  tr["steps"] = training.steps;
  tr["batch_trajectories"] = training.batch_trajectories;
  tr["learning_rate"] = training.learning_rate;
  tr["momentum"] = training.momentum;
  tr["final_lr_fraction"] = training.final_lr_fraction;
  tr["mask"] = training.mask ? training.mask->to_string() : std::string("default");
  tr["normalize_actions"] = training.normalize_actions;
  tr["normalize_inputs"] = training.normalize_inputs;
  j["training"] = std::move(tr);
  j["eval"] = {{"n_episodes", n_eval}, {"seed", eval_seed}, {"max_steps", eval_max_steps}};
  j["seeds"] = seeds;
  if (sweep) {
    std::vector<std::string> names;
    for (const auto& s : sweep->strategies) names.emplace_back(s ? std::string(to_string(*s)) : "none");
    j["sweep"] = {{"strategies", names}, {"clip_max", sweep->clip_max}};
  }
  if (!reference.empty()) j["reference"] = reference;
  return j.dump();
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    check_keys(j, {"task", "data", "weighting", "training", "eval", "seeds", "sweep", "reference", "threads"}, "config");
    if (j.contains("task")) c.task = task_from_json(j["task"]);
    if (j.contains("data")) {
      check_keys(j["data"], {"n_train", "seed"}, "data");
      read(j["data"], "n_train", c.n_train);
      read(j["data"], "seed", c.data_seed);
    }
    if (j.contains("weighting")) {
      const auto& w = j["weighting"];
      check_keys(w, {"strategy", "alpha", "eps_floor", "clip_max", "normalize"}, "weighting");
      const auto strategy = parse_strategy_or_none(w.value("strategy", std::string("inverse_squared")));
      if (strategy) {
        WeightingConfig wc;
        wc.strategy = *strategy;
        read(w, "alpha", wc.alpha);
        read(w, "eps_floor", wc.eps_floor);
        read(w, "clip_max", wc.clip_max);
        read(w, "normalize", wc.normalize);
        c.weighting = wc;
      } else {
        c.weighting = std::nullopt;
      }
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      check_keys(t, {"hidden", "activation", "steps", "batch_trajectories", "learning_rate", "momentum", "mask",
                     "normalize_actions", "normalize_inputs", "final_lr_fraction"},
                 "training");
      read(t, "hidden", c.training.hidden);
      if (t.contains("activation")) c.training.activation = parse_activation(t["activation"].get<std::string>());
      read(t, "steps", c.training.steps);
      read(t, "batch_trajectories", c.training.batch_trajectories);
      read(t, "learning_rate", c.training.learning_rate);
      read(t, "momentum", c.training.momentum);
      read(t, "final_lr_fraction", c.training.final_lr_fraction);
      read(t, "normalize_actions", c.training.normalize_actions);
      read(t, "normalize_inputs", c.training.normalize_inputs);
      if (t.contains("mask")) {
        const auto m = t["mask"].get<std::string>();
        if (m == "default") {
          c.training.mask.reset();
        } else {
          c.training.mask = DimMask::parse(m);
        }
      }
    }
    if (j.contains("eval")) {
      check_keys(j["eval"], {"n_episodes", "seed", "max_steps"}, "eval");
      read(j["eval"], "n_episodes", c.n_eval);
      read(j["eval"], "seed", c.eval_seed);
      read(j["eval"], "max_steps", c.eval_max_steps);
    }
    read(j, "seeds", c.seeds);
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      check_keys(s, {"strategies", "clip_max"}, "sweep");
      Sweep sw;
      for (const auto& name : s.at("strategies").get<std::vector<std::string>>()) {
        sw.strategies.push_back(parse_strategy_or_none(name));
      }
      sw.clip_max = s.at("clip_max").get<std::vector<double>>();
      c.sweep = std::move(sw);
    }
    read(j, "reference", c.reference);
    read(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return ExperimentConfig::from_json(text.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<TaskSpec> eval_specs_for(const ExperimentConfig& config) {
  auto specs = sample_task_specs(config.task, config.n_eval, config.eval_seed);
  for (auto& s : specs) s.max_steps = config.eval_max_steps;
  return specs;
}

ExperimentRun run_configured(const ExperimentConfig& config) {
  config.validate();
  const Dataset train = make_dataset(config.task, config.n_train, config.data_seed);
  const auto specs = eval_specs_for(config);

  ExperimentRun run;
  run.report.config_json = config.to_json();
  for (const auto& cell : config.cells()) {
    run.results.push_back(run_experiment(cell, train, specs, config.training, config.seeds, config.threads));
    run.report.rows.push_back(to_report_row(run.results.back()));
  }
  run.report.tasks = run.results.front().tasks;
  run.report.reference = config.reference.empty() ? run.report.rows.front().method : config.reference;
  run.report.validate();
  return run;
}

}  // namespace velatt

#include "velatt/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "velatt/error.hpp"
#include "velatt/experiment_config.hpp"
#include "velatt/metrics.hpp"
#include "velatt/synth_bench.hpp"
#include "velatt/tinynet.hpp"
#include "velatt/trajectory.hpp"
#include "velatt/velocity.hpp"
#include "velatt/weighting.hpp"

namespace velatt {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string input;
  std::vector<std::string> inputs;
  std::string output;
  std::string format;
  std::string input_format;
  std::string strategy = "inverse_squared";
  double alpha = 5.0;
  double clip_max = 2.0;
  std::string normalize = "on";
  std::string mask;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::string config;
  std::string reference;
  std::string name;
  std::size_t count = 50;
  std::size_t threads = 0;
  double drop_static = 0.0;
  std::size_t smooth = 1;
};

Format resolve_format(const std::string& flag, const std::string& path) {
  return flag.empty() ? format_from_path(path) : parse_format(flag);
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

Dataset load(const Options& o) {
  require_file(o.input);
  return ingest(o.input, resolve_format(o.input_format, o.input));
}

DimMask mask_for(const Options& o, std::size_t action_dim) {
  DimMask m = o.mask.empty() ? DimMask::default_for(action_dim) : DimMask::parse(o.mask);
  m.check_fits(action_dim);
  return m;
}

WeightingConfig weighting_from(const Options& o, Strategy s) {
  WeightingConfig w;
  w.strategy = s;
  w.alpha = o.alpha;
  w.clip_max = o.clip_max;
  w.normalize = o.normalize == "on";
  w.validate();
  return w;
}

ExperimentConfig config_from(const Options& o) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    require_file(o.config);
    c = load_experiment_config(o.config);
  }
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.threads > 0) c.threads = o.threads;
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o, std::ostream& out) {
  Dataset ds = load(o);
  if (o.drop_static > 0.0 || o.smooth > 1) {
    CleanOptions opts;
    opts.drop_static_threshold = o.drop_static;
    opts.smooth_window = o.smooth;
    if (!o.mask.empty()) opts.motion_mask = mask_for(o, ds.action_dim);
    for (auto& t : ds.trajectories) t = clean(t, opts);
  }
  serialize(ds, o.output, resolve_format(o.format, o.output));
  std::size_t steps = 0;
  for (const auto& t : ds.trajectories) steps += t.length();
  out << "wrote " << ds.size() << " trajectories (" << steps << " steps, D=" << ds.action_dim << ") to "
      << o.output << '\n';
  return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const Dataset ds = load(o);
  const DimMask mask = mask_for(o, ds.action_dim);
  const auto fields = batch_velocity(ds, mask);
  {
    auto file = open_out(o.output);
    write_velocity_csv(fields, file);
  }
  char buf[256];
  out << "traj_id,T,min,q10,median,mean,q90,max\n";
  std::vector<double> all;
  for (const auto& f : fields) {
    const VelocityStats s = velocity_stats(f);
    std::snprintf(buf, sizeof buf, ",%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g", f.values.size(), s.min, s.q10, s.q50,
                  s.mean, s.q90, s.max);
    out << f.source_id << buf << '\n';
    all.insert(all.end(), f.values.begin(), f.values.end());
  }
  const VelocityStats s = velocity_stats(VelocityField{all, "all", mask});
  std::snprintf(buf, sizeof buf, "all,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g", all.size(), s.min, s.q10, s.q50, s.mean,
                s.q90, s.max);
  out << buf << '\n';
  return kExitOk;
}

int cmd_weights(const Options& o, std::ostream& out) {
  // Validate the weighting flags before touching the input.
  std::vector<Strategy> strategies;
  if (o.strategy == "all") {
    strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
  } else if (o.strategy != "none") {
    strategies.push_back(parse_strategy(o.strategy));
  }
  std::vector<WeightingConfig> configs;
  for (Strategy s : strategies) configs.push_back(weighting_from(o, s));
  if (strategies.empty() && !(o.clip_max >= 1.0)) throw ValidationError("clip_max must be >= 1");

  const Dataset ds = load(o);
  const auto fields = batch_velocity(ds, mask_for(o, ds.action_dim));

  std::ofstream file;
  std::ostream* dst = &out;
  if (!o.output.empty()) {
    file = open_out(o.output);
    dst = &file;
  }
  *dst << kWeightCsvHeader << '\n';
  const bool blocks = o.strategy == "all" || o.strategy == "none";
  for (const auto& cfg : configs) {
    if (blocks) *dst << "# block: " << to_string(cfg.strategy) << '\n';
    std::vector<WeightProfile> profiles;
    for (const auto& f : fields) profiles.push_back(weight_profile(f, cfg));
    write_weight_rows(profiles, *dst);
  }
  if (blocks) {
    *dst << "# block: uniform\n";
    std::vector<WeightProfile> profiles;
    for (const auto& f : fields) {
      WeightProfile p = uniform_profile(f.values.size(), f.source_id);
      p.velocity = f.values;
      profiles.push_back(std::move(p));
    }
    write_weight_rows(profiles, *dst);
  }
  return kExitOk;
}

int cmd_gen(const Options& o, std::ostream& out) {
  ExperimentConfig c = config_from(o);
  if (o.count == 0) throw ValidationError("--count must be positive");
  const Format format = resolve_format(o.format, o.output);
  const Dataset ds = make_dataset(c.task, o.count, o.seed);
  serialize(ds, o.output, format);
  out << "wrote " << ds.size() << " demonstrations to " << o.output << '\n';
  return kExitOk;
}

std::string checkpoint_name(const std::string& method, std::uint64_t seed) {
  return method + "_seed" + std::to_string(seed) + ".ckpt";
}

int cmd_train(const Options& o, std::ostream& out) {
  ExperimentConfig c = config_from(o);
  const fs::path dir = o.output;
  fs::create_directories(dir / "checkpoints");

  const ExperimentRun run = run_configured(c);
  const std::string echo = "# config: " + c.to_json() + "\n";

  save_report(run.report, (dir / "report.json").string());
  {
    auto csv = open_out(dir / "report.csv");
    csv << echo;
    write_csv(run.report, csv);
  }
  {
    auto txt = open_out(dir / "report.txt");
    txt << echo;
    write_table(run.report, txt);
  }
  {
    auto losses = open_out(dir / "losses.csv");
    losses << echo << "method,seed,step,loss\n";
    char buf[64];
    for (const auto& result : run.results) {
      for (const auto& s : result.seeds) {
        for (std::size_t i = 0; i < s.losses.size(); ++i) {
          std::snprintf(buf, sizeof buf, ",%zu,%.17g", i, s.losses[i]);
          losses << result.method << ',' << s.seed << buf << '\n';
        }
        save_checkpoint(s.policy.spec, s.policy.params, dir / "checkpoints" / checkpoint_name(result.method, s.seed));
      }
    }
  }
  write_table(run.report, out);
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  ExperimentConfig c = config_from(o);
  require_file(o.input);
  const Checkpoint ckpt = load_checkpoint(fs::path(o.input));
  if (ckpt.spec.input_size() != kStateDim || ckpt.spec.output_size() != kActionDim) {
    throw ValidationError("checkpoint does not match the benchmark state/action sizes");
  }
  const Policy policy{ckpt.spec, ckpt.params};
  const auto specs = eval_specs_for(c);

  ExperimentResult result;
  result.method = o.name.empty() ? fs::path(o.input).stem().string() : o.name;
  result.tasks = {c.task.name};
  SeedOutcome outcome;
  outcome.seed = ckpt.spec.seed;
  for (const auto& spec : specs) {
    RolloutResult r = rollout(policy, spec, spec.max_steps);
    r.trajectory.meta["task"] = spec.name;
    outcome.rollouts.push_back(std::move(r));
  }
  result.seeds.push_back(std::move(outcome));

  EvalReport report;
  report.tasks = result.tasks;
  report.rows.push_back(to_report_row(result));
  report.rows.back().extras.erase("final_loss");
  report.reference = result.method;
  report.config_json = c.to_json();
  if (!o.output.empty()) save_report(report, o.output);
  write_table(report, out);
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  EvalReport merged;
  for (const auto& path : o.inputs) {
    require_file(path);
    EvalReport r = load_report(path);
    r.config_json.clear();
    merged.merge(r);
  }
  merged.reference = o.reference;
  merged.validate();
  if (o.output.empty()) {
    write_table(merged, out);
    return kExitOk;
  }
  auto file = open_out(o.output);
  const std::string ext = fs::path(o.output).extension().string();
  if (ext == ".csv") {
    write_csv(merged, file);
  } else if (ext == ".json") {
    write_report_json(merged, file);
  } else {
    write_table(merged, file);
  }
  write_table(merged, out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Velocity-field action attention toolkit", "velatt"};
  app.require_subcommand(1);
  Options o;

  const std::vector<std::string> strategy_names{"inverse", "inverse_squared", "exp_decay", "log", "all", "none"};
  auto add_input = [&](CLI::App* sub) { sub->add_option("--input", o.input, "Input file")->required(); };
  auto add_mask = [&](CLI::App* sub) {
    sub->add_option("--mask", o.mask, "Velocity dimensions, e.g. 0-5 (default: all but the last)");
  };
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "Experiment config (JSON)"); };

  auto* ingest_cmd = app.add_subcommand("ingest", "Validate, optionally clean, and convert a dataset");
  add_input(ingest_cmd);
  ingest_cmd->add_option("--input-format", o.input_format, "Input format (default: from extension)")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  ingest_cmd->add_option("--output", o.output, "Output dataset")->required();
  ingest_cmd->add_option("--format", o.format, "Output format (default: from extension)")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  ingest_cmd->add_option("--drop-static", o.drop_static, "Drop steps with motion norm <= threshold")
      ->check(CLI::NonNegativeNumber);
  ingest_cmd->add_option("--smooth", o.smooth, "Odd moving-average window (1 disables)");
  add_mask(ingest_cmd);

  auto* analyze_cmd = app.add_subcommand("analyze", "Per-step velocity field and summary statistics");
  add_input(analyze_cmd);
  analyze_cmd->add_option("--format", o.input_format, "Input format")->check(CLI::IsMember({"jsonl", "csv"}));
  analyze_cmd->add_option("--output", o.output, "Velocity CSV (traj_id,t,v)")->required();
  add_mask(analyze_cmd);

  auto* weights_cmd = app.add_subcommand("weights", "Export per-step attention weights as CSV");
  add_input(weights_cmd);
  weights_cmd->add_option("--format", o.input_format, "Input format")->check(CLI::IsMember({"jsonl", "csv"}));
  weights_cmd->add_option("--output", o.output, "Output CSV (default: stdout)");
  weights_cmd->add_option("--strategy", o.strategy, "Weighting strategy")
      ->check(CLI::IsMember(strategy_names))
      ->capture_default_str();
  weights_cmd->add_option("--alpha", o.alpha, "exp_decay rate")->capture_default_str();
  weights_cmd->add_option("--clip-max", o.clip_max, "Clip bound (>= 1)")->capture_default_str();
  weights_cmd->add_option("--normalize", o.normalize, "Per-trajectory mean-1 normalization")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  add_mask(weights_cmd);

  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic pick-and-place demonstrations");
  gen_cmd->add_option("--output", o.output, "Output dataset")->required();
  gen_cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"jsonl", "csv"}));
  gen_cmd->add_option("--count", o.count, "Number of demonstrations")->capture_default_str();
  gen_cmd->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  add_config(gen_cmd);

  auto* train_cmd = app.add_subcommand("train", "Train and evaluate policies from an experiment config");
  add_config(train_cmd);
  train_cmd->get_option("--config")->required();
  train_cmd->add_option("--output", o.output, "Output directory")->required();
  train_cmd->add_option("--seeds", o.seeds, "Override training seeds, e.g. 0,1,2,3")->delimiter(',');
  train_cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");

  auto* eval_cmd = app.add_subcommand("eval", "Roll out a checkpoint on the benchmark");
  eval_cmd->add_option("--input", o.input, "Checkpoint")->required();
  add_config(eval_cmd);
  eval_cmd->add_option("--output", o.output, "Report JSON");
  eval_cmd->add_option("--name", o.name, "Method name in the report (default: checkpoint stem)");

  auto* report_cmd = app.add_subcommand("report", "Merge reports into a comparison table");
  report_cmd->add_option("--input", o.inputs, "Report JSON files")->required();
  report_cmd->add_option("--reference", o.reference, "Reference method for SR-I / RER-R")->required();
  report_cmd->add_option("--output", o.output, "Write .txt, .csv or .json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(o, out);
    if (*analyze_cmd) return cmd_analyze(o, out);
    if (*weights_cmd) return cmd_weights(o, out);
    if (*gen_cmd) return cmd_gen(o, out);
    if (*train_cmd) return cmd_train(o, out);
    if (*eval_cmd) return cmd_eval(o, out);
    if (*report_cmd) return cmd_report(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace velatt

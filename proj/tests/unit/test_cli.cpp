#include <doctest.h>

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "support.hpp"
#include "velatt/cli.hpp"
#include "velatt/metrics.hpp"
#include "velatt/synth_bench.hpp"

using namespace velatt;
using velatt::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"velatt"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

constexpr const char* kSmallConfig = R"({
  "data": {"n_train": 4, "seed": 3},
  "training": {"hidden": [8], "steps": 6, "batch_trajectories": 2},
  "eval": {"n_episodes": 2, "max_steps": 30},
  "seeds": [0, 1]
})";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"weights", "--input", "x.jsonl", "--strategy", "cubic"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("missing input names the path") {
  const Run r = cli({"analyze", "--input", "/nonexistent/demos.jsonl", "--output", "/tmp/unused.csv"});
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/demos.jsonl") != std::string::npos);
}

TEST_CASE("gen, ingest, analyze and weights") {
  TempDir dir("cli");
  const auto demos = (dir / "demos.jsonl").string();
  REQUIRE(cli({"gen", "--output", demos, "--count", "3", "--seed", "2"}).code == 0);

  const auto csv = (dir / "demos.csv").string();
  REQUIRE(cli({"ingest", "--input", demos, "--output", csv}).code == 0);
  const auto back = (dir / "back.jsonl").string();
  REQUIRE(cli({"ingest", "--input", csv, "--output", back}).code == 0);
  // CSV keeps numbers and states but not metadata.
  const Dataset a = ingest(demos, Format::jsonl), b = ingest(back, Format::jsonl);
  REQUIRE(a.size() == b.size());
  std::size_t total_steps = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.trajectories[i].actions == b.trajectories[i].actions);
    CHECK(a.trajectories[i].states == b.trajectories[i].states);
    total_steps += a.trajectories[i].length();
  }

  const auto cleaned = (dir / "clean.jsonl").string();
  CHECK(cli({"ingest", "--input", demos, "--output", cleaned, "--smooth", "3", "--drop-static", "0.001"}).code == 0);
  CHECK(cli({"ingest", "--input", demos, "--output", cleaned, "--smooth", "2"}).code == 2);

  const auto vel = (dir / "v.csv").string();
  const Run analyzed = cli({"analyze", "--input", demos, "--output", vel});
  REQUIRE(analyzed.code == 0);
  CHECK(lines_of(slurp(vel)).size() == total_steps + 1);
  CHECK(lines_of(analyzed.out).size() == a.size() + 2);
  CHECK(cli({"analyze", "--input", demos, "--output", vel, "--mask", "0-7"}).code == 2);

  const Run unit = cli({"weights", "--input", demos, "--clip-max", "1", "--strategy", "exp_decay"});
  REQUIRE(unit.code == 0);
  const auto rows = lines_of(unit.out);
  CHECK(rows.front() == "traj_id,t,v,w_raw,w_clipped,w_final");
  CHECK(rows.size() == total_steps + 1);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].rfind(',') + 1) == "1");

  CHECK(cli({"weights", "--input", demos, "--clip-max", "10", "--normalize", "off"}).code == 0);
  CHECK(cli({"weights", "--input", demos, "--clip-max", "0.5"}).code == 2);
}

TEST_CASE("strategy all writes four blocks and the uniform baseline") {
  TempDir dir("cli_all");
  const auto one = (dir / "one.jsonl").string();
  REQUIRE(cli({"gen", "--output", one, "--count", "1"}).code == 0);
  const auto out = (dir / "w.csv").string();
  REQUIRE(cli({"weights", "--input", one, "--strategy", "all", "--output", out}).code == 0);
  std::vector<std::string> blocks;
  for (const auto& line : lines_of(slurp(out))) {
    if (line.rfind("# block: ", 0) == 0) blocks.push_back(line.substr(9));
  }
  CHECK(blocks == std::vector<std::string>{"inverse", "inverse_squared", "exp_decay", "log", "uniform"});
}

TEST_CASE("train, eval and report") {
  TempDir dir("cli_train");
  write_file(dir / "cfg.json", kSmallConfig);
  const auto cfg = (dir / "cfg.json").string();

  const Run first = cli({"train", "--config", cfg, "--output", (dir / "a").string()});
  REQUIRE(first.code == 0);
  const Run second = cli({"train", "--config", cfg, "--output", (dir / "b").string(), "--threads", "2"});
  REQUIRE(second.code == 0);
  for (const char* name : {"report.json", "report.csv", "report.txt", "losses.csv"}) {
    CAPTURE(name);
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  CHECK(slurp(dir / "a" / "report.csv").rfind("# config: {", 0) == 0);
  const auto ckpt = dir / "a" / "checkpoints" / "inverse_squared@clip2_seed1.ckpt";
  CHECK(std::filesystem::exists(ckpt));

  const auto evald = (dir / "eval.json").string();
  const Run ev = cli({"eval", "--input", ckpt.string(), "--config", cfg, "--output", evald, "--name", "seed1"});
  REQUIRE(ev.code == 0);
  CHECK(load_report(evald).rows[0].method == "seed1");

  const auto merged = (dir / "merged.csv").string();
  const Run rep = cli({"report", "--input", (dir / "a" / "report.json").string(), "--input", evald, "--reference",
                       "seed1", "--output", merged});
  REQUIRE(rep.code == 0);
  CHECK(lines_of(slurp(merged)).size() == 3);
  CHECK(cli({"report", "--input", evald, "--reference", "nobody"}).code == 2);

  const Run single = cli({"report", "--input", evald, "--reference", "seed1"});
  CHECK(single.code == 0);
  CHECK(lines_of(single.out).size() == 4);  // header, rule, row, single-seed note

  CHECK(cli({"eval", "--input", cfg, "--config", cfg}).code == 2);
}

TEST_CASE("unit clip and the unweighted baseline give the same report") {
  TempDir dir("cli_degenerate");
  const std::string base = std::string(kSmallConfig);
  const std::string body = base.substr(0, base.rfind('}'));
  write_file(dir / "none.json", body + R"(, "weighting": {"strategy": "none"}})");
  write_file(dir / "unit.json", body + R"(, "weighting": {"strategy": "log", "clip_max": 1}})");
  REQUIRE(cli({"train", "--config", (dir / "none.json").string(), "--output", (dir / "n").string()}).code == 0);
  REQUIRE(cli({"train", "--config", (dir / "unit.json").string(), "--output", (dir / "u").string()}).code == 0);
  EvalReport n = load_report((dir / "n" / "report.json").string());
  EvalReport u = load_report((dir / "u" / "report.json").string());
  CHECK(n.rows[0].method == "uniform");
  CHECK(u.rows[0].method == "log@clip1");
  u.rows[0].method = n.rows[0].method;
  CHECK(u.rows == n.rows);
}

TEST_CASE("published LIBERO table through the report command") {
  const Run r = cli({"report", "--input", std::string(VELATT_TEST_DATA) + "/libero_table.json", "--reference", "AttenA+OFT"});
  REQUIRE(r.code == 0);
  CHECK(lines_of(r.out).size() == 20);
  CHECK(r.out.find("OpenVLA-OFT     97.6    98.4  97.9  94.5  97.10   2.90   +1.5  -51.7") != std::string::npos);
}

TEST_CASE("divergence exits with 1") {
  TempDir dir("cli_div");
  write_file(dir / "cfg.json", R"({
    "data": {"n_train": 3},
    "training": {"hidden": [8], "activation": "relu", "steps": 20, "learning_rate": 1e300, "momentum": 0},
    "eval": {"n_episodes": 1},
    "seeds": [0]
  })");
  const Run r = cli({"train", "--config", (dir / "cfg.json").string(), "--output", (dir / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("diverged") != std::string::npos);
  CHECK(r.err.find("at step") != std::string::npos);
}

TEST_CASE("invalid configs exit with 2") {
  TempDir dir("cli_bad");
  write_file(dir / "bad.json", R"({"seeds": []})");
  CHECK(cli({"train", "--config", (dir / "bad.json").string(), "--output", (dir / "o").string()}).code == 2);
  CHECK(cli({"train", "--config", (dir / "missing.json").string(), "--output", (dir / "o").string()}).code == 2);
}

#include "velatt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "velatt/error.hpp"
#include "velatt/synth_bench.hpp"

namespace velatt {

namespace {

void check_percent(double x, const char* what) {
  if (!std::isfinite(x) || x < 0.0 || x > 100.0) {
    throw ValidationError(std::string(what) + " must lie in [0, 100], got " + std::to_string(x));
  }
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

constexpr const char* kReportFormat = "velatt-report/1";

}  // namespace

double success_rate(std::size_t successes, std::size_t trials) {
  if (trials == 0) throw ValidationError("success rate needs at least one trial");
  if (successes > trials) throw ValidationError("more successes than trials");
  return 100.0 * static_cast<double>(successes) / static_cast<double>(trials);
}

double error_rate(double mean_sr) {
  check_percent(mean_sr, "mean success rate");
  return 100.0 - mean_sr;
}

double sr_improvement(double sr_ref, double sr_other) { return sr_ref - sr_other; }

double rer_r(double er_ref, double er_other) {
  if (!(er_other > 0.0)) throw ValidationError("relative error reduction undefined for a zero error rate");
  return (1.0 - er_ref / er_other) * 100.0;
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw ValidationError("cannot aggregate an empty sequence");
  Aggregate a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return a;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  a.std_defined = true;
  return a;
}

double mean_sr(const ReportRow& row) {
  if (!row.task_sr.empty()) return aggregate(row.task_sr).mean;
  if (!row.seed_sr.empty()) return aggregate(row.seed_sr).mean;
  throw ValidationError("row '" + row.method + "' has no success rates");
}

void EvalReport::validate() const {
  if (rows.empty()) throw ValidationError("report has no rows");
  std::set<std::string> names;
  for (const auto& r : rows) {
    if (!names.insert(r.method).second) throw ValidationError("duplicate method '" + r.method + "'");
    if (r.task_sr.size() != tasks.size()) {
      throw ValidationError("row '" + r.method + "' has " + std::to_string(r.task_sr.size()) + " task values, expected " +
                            std::to_string(tasks.size()));
    }
    for (double x : r.task_sr) check_percent(x, "task success rate");
    for (double x : r.seed_sr) check_percent(x, "seed success rate");
    if (r.task_sr.empty() && r.seed_sr.empty()) throw ValidationError("row '" + r.method + "' has no success rates");
  }
  if (!names.count(reference)) throw ValidationError("reference row '" + reference + "' not found");
}

const ReportRow& EvalReport::row(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r;
  }
  throw ValidationError("no row named '" + method + "'");
}

DerivedColumns EvalReport::derived(const ReportRow& r) const {
  DerivedColumns d;
  d.mean_sr = mean_sr(r);
  d.er = error_rate(d.mean_sr);
  if (!r.seed_sr.empty()) d.seeds = aggregate(r.seed_sr);
  if (r.method == reference) return d;
  const double ref_sr = mean_sr(row(reference));
  d.sr_i = sr_improvement(ref_sr, d.mean_sr);
  if (d.er > 0.0) d.rer_r = rer_r(error_rate(ref_sr), d.er);
  return d;
}

void EvalReport::merge(const EvalReport& other) {
  if (rows.empty() && tasks.empty()) {
    tasks = other.tasks;
  } else if (tasks != other.tasks) {
    throw ValidationError("cannot merge reports with different task lists");
  }
  for (const auto& r : other.rows) {
    if (std::any_of(rows.begin(), rows.end(), [&](const ReportRow& x) { return x.method == r.method; })) {
      throw ValidationError("duplicate method '" + r.method + "' while merging");
    }
    rows.push_back(r);
  }
  if (reference.empty()) reference = other.reference;
}

void write_table(const EvalReport& report, std::ostream& out) {
  report.validate();
  const bool any_seeds =
      std::any_of(report.rows.begin(), report.rows.end(), [](const ReportRow& r) { return !r.seed_sr.empty(); });
  const bool any_singleton =
      std::any_of(report.rows.begin(), report.rows.end(), [](const ReportRow& r) { return r.seed_sr.size() == 1; });

  std::vector<std::string> header{"Method"};
  header.insert(header.end(), report.tasks.begin(), report.tasks.end());
  for (const char* h : {"SR", "ER", "SR-I", "RER-R"}) header.emplace_back(h);
  if (any_seeds) header.emplace_back("Seeds");

  std::vector<std::vector<std::string>> cells;
  for (const auto& r : report.rows) {
    const DerivedColumns d = report.derived(r);
    std::vector<std::string> line{r.method};
    for (double x : r.task_sr) line.push_back(fmt("%.1f", x));
    line.push_back(fmt("%.2f", d.mean_sr));
    line.push_back(fmt("%.2f", d.er));
    line.push_back(d.sr_i ? fmt("%+.1f", *d.sr_i) : "-");
    // Adding 0.0 turns a negated zero into +0 so it prints as "0.0".
    line.push_back(d.rer_r ? fmt("%.1f", -*d.rer_r + 0.0) : "-");
    if (any_seeds) {
      line.push_back(d.seeds ? fmt("%.2f", d.seeds->mean) + " +- " + fmt("%.2f", d.seeds->std) +
                                   (d.seeds->std_defined ? "" : "*")
                             : "-");
    }
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
  }
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        out << line[c] << std::string(width[c] - line[c].size(), ' ');
      } else {
        out << "  " << std::string(width[c] - line[c].size(), ' ') << line[c];
      }
    }
    out << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  out << std::string(total - 2, '-') << '\n';
  for (const auto& line : cells) emit(line);
  if (any_singleton) out << "(* single seed: std not defined, shown as 0)\n";
}

void write_csv(const EvalReport& report, std::ostream& out) {
  report.validate();
  std::set<std::string> extra_keys;
  for (const auto& r : report.rows) {
    for (const auto& [k, v] : r.extras) extra_keys.insert(k);
  }
  out << "method";
  for (const auto& t : report.tasks) out << ',' << t;
  out << ",mean_sr,er,sr_i,rer_r,seed_mean,seed_std,n_seeds";
  for (const auto& k : extra_keys) out << ',' << k;
  out << '\n';
  auto num = [](double x) { return fmt("%.10g", x); };
  for (const auto& r : report.rows) {
    const DerivedColumns d = report.derived(r);
    out << r.method;
    for (double x : r.task_sr) out << ',' << num(x);
    out << ',' << num(d.mean_sr) << ',' << num(d.er) << ',' << (d.sr_i ? num(*d.sr_i) : "") << ','
        << (d.rer_r ? num(*d.rer_r) : "") << ',';
    if (d.seeds) {
      out << num(d.seeds->mean) << ',' << num(d.seeds->std) << ',' << r.seed_sr.size();
    } else {
      out << ",,0";
    }
    for (const auto& k : extra_keys) {
      out << ',';
      if (auto it = r.extras.find(k); it != r.extras.end()) out << num(it->second);
    }
    out << '\n';
  }
}

void write_report_json(const EvalReport& report, std::ostream& out) {
  report.validate();
  nlohmann::ordered_json j;
  j["format"] = kReportFormat;
  j["reference"] = report.reference;
  j["tasks"] = report.tasks;
  j["config"] = report.config_json.empty() ? nlohmann::ordered_json::object()
                                           : nlohmann::ordered_json::parse(report.config_json);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    const DerivedColumns d = report.derived(r);
    nlohmann::ordered_json jr;
    jr["method"] = r.method;
    jr["task_sr"] = r.task_sr;
    jr["seed_sr"] = r.seed_sr;
    jr["extras"] = r.extras;
    nlohmann::ordered_json jd;
    jd["mean_sr"] = d.mean_sr;
    jd["er"] = d.er;
    jd["sr_i"] = d.sr_i ? nlohmann::ordered_json(*d.sr_i) : nlohmann::ordered_json();
    jd["rer_r"] = d.rer_r ? nlohmann::ordered_json(*d.rer_r) : nlohmann::ordered_json();
    if (d.seeds) {
      jd["seed_mean"] = d.seeds->mean;
      jd["seed_std"] = d.seeds->std;
      jd["seed_std_defined"] = d.seeds->std_defined;
    }
    jr["derived"] = std::move(jd);
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  out << j.dump(2) << '\n';
}

EvalReport read_report_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string{}) != kReportFormat) {
      throw ValidationError("unsupported report format, expected " + std::string(kReportFormat));
    }
    EvalReport r;
    r.reference = j.at("reference").get<std::string>();
    r.tasks = j.at("tasks").get<std::vector<std::string>>();
    if (j.contains("config") && !j["config"].empty()) r.config_json = j["config"].dump();
    for (const auto& jr : j.at("rows")) {
      ReportRow row;
      row.method = jr.at("method").get<std::string>();
      row.task_sr = jr.at("task_sr").get<std::vector<double>>();
      row.seed_sr = jr.value("seed_sr", std::vector<double>{});
      row.extras = jr.value("extras", std::map<std::string, double>{});
      r.rows.push_back(std::move(row));
    }
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path + "'");
  try {
    return read_report_json(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report '" + path + "'");
  write_report_json(report, out);
  if (!out) throw IoError("failed writing report '" + path + "'");
}

ReportRow to_report_row(const ExperimentResult& result) {
  ReportRow row;
  row.method = result.method;
  row.task_sr = result.task_success_rates();
  row.seed_sr = result.seed_success_rates();
  row.extras["place_error"] = result.mean_place_error();
  row.extras["tracking_error_slow"] = result.tracking_error(true);
  row.extras["tracking_error_fast"] = result.tracking_error(false);
  double final_loss = 0.0;
  for (const auto& s : result.seeds) final_loss += s.losses.empty() ? 0.0 : s.losses.back();
  if (!result.seeds.empty()) row.extras["final_loss"] = final_loss / static_cast<double>(result.seeds.size());
  return row;
}

}  // namespace velatt

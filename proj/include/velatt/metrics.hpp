#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace velatt {

struct ExperimentResult;

/// 100 * successes / trials. Throws ValidationError when trials == 0 or successes > trials.
double success_rate(std::size_t successes, std::size_t trials);

/// 100 - mean_sr, with mean_sr required to lie in [0, 100].
double error_rate(double mean_sr);

/// Absolute gain of the reference over another row: sr_ref - sr_other.
double sr_improvement(double sr_ref, double sr_other);

/// Relative error-rate reduction (1 - er_ref / er_other) * 100. Positive when
/// the reference makes fewer errors. Throws ValidationError when er_other <= 0.
double rer_r(double er_ref, double er_other);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;          // sample standard deviation (n - 1)
  bool std_defined = false;  // false for a single value, where std is reported as 0
};

Aggregate aggregate(std::span<const double> values);

struct ReportRow {
  std::string method;
  std::vector<double> task_sr;  // percent, one per report task
  std::vector<double> seed_sr;  // percent, one per seed (may be empty)
  /// Free-form numeric diagnostics (place error, tracking errors, ...).
  std::map<std::string, double> extras;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Columns computed from a row and the reference row.
struct DerivedColumns {
  double mean_sr = 0.0;
  double er = 0.0;
  std::optional<double> sr_i;   // empty on the reference row
  std::optional<double> rer_r;  // empty on the reference row or when er is 0
  std::optional<Aggregate> seeds;
};

struct EvalReport {
  std::vector<std::string> tasks;
  std::vector<ReportRow> rows;
  std::string reference;  // method name of the reference row
  /// Configuration echoed into serialized reports (JSON text, may be empty).
  std::string config_json;

  /// Every SR in [0, 100], every row has one SR per task, method names are
  /// unique and the reference names exactly one row.
  void validate() const;

  const ReportRow& row(const std::string& method) const;
  DerivedColumns derived(const ReportRow& row) const;

  /// Appends rows of `other` (tasks must match). Duplicate method names throw.
  void merge(const EvalReport& other);

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Row mean over tasks.
double mean_sr(const ReportRow& row);

/// Aligned plain-text table: tasks, mean SR, ER, SR-I, RER-R. Comparison rows
/// print RER-R with a leading minus as the reduction achieved by the reference.
void write_table(const EvalReport& report, std::ostream& out);
void write_csv(const EvalReport& report, std::ostream& out);

void write_report_json(const EvalReport& report, std::ostream& out);
EvalReport read_report_json(std::istream& in);
EvalReport load_report(const std::string& path);
void save_report(const EvalReport& report, const std::string& path);

ReportRow to_report_row(const ExperimentResult& result);

}  // namespace velatt

#include "velatt/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "velatt/error.hpp"

namespace velatt {

namespace {

using nlohmann::json;

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", kSerializePrecision, value);
  return buf;
}

void check_finite_rows(const std::vector<std::vector<double>>& rows, const std::string& id,
                       const char* what) {
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t d = 0; d < rows[t].size(); ++d) {
      if (!std::isfinite(rows[t][d])) {
        throw ValidationError("trajectory '" + id + "': non-finite " + what + " value at t=" +
                              std::to_string(t) + ", dim " + std::to_string(d));
      }
    }
  }
}

}  // namespace

void Trajectory::validate() const {
  if (actions.empty()) {
    throw ValidationError("trajectory '" + id + "' has no timesteps");
  }
  const std::size_t dim = actions.front().size();
  if (dim == 0) {
    throw ValidationError("trajectory '" + id + "' has zero action dimensions");
  }
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (actions[t].size() != dim) {
      throw ValidationError("trajectory '" + id + "': inconsistent action dimension at t=" +
                            std::to_string(t) + " (" + std::to_string(actions[t].size()) +
                            " vs " + std::to_string(dim) + ")");
    }
  }
  check_finite_rows(actions, id, "action");
  if (states) {
    if (states->size() != actions.size()) {
      throw ValidationError("trajectory '" + id + "': " + std::to_string(states->size()) +
                            " states for " + std::to_string(actions.size()) + " actions");
    }
    const std::size_t sdim = states->front().size();
    for (std::size_t t = 0; t < states->size(); ++t) {
      if ((*states)[t].size() != sdim) {
        throw ValidationError("trajectory '" + id + "': inconsistent state dimension at t=" +
                              std::to_string(t));
      }
    }
    check_finite_rows(*states, id, "state");
  }
}

Matrix Trajectory::action_matrix() const {
  Matrix m(length(), action_dim());
  for (std::size_t t = 0; t < length(); ++t) {
    for (std::size_t d = 0; d < action_dim(); ++d) m(t, d) = actions[t][d];
  }
  return m;
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& traj : trajectories) {
    traj.validate();
    if (traj.action_dim() != action_dim) {
      throw ValidationError("trajectory '" + traj.id + "' has action dimension " +
                            std::to_string(traj.action_dim()) + ", dataset expects " +
                            std::to_string(action_dim));
    }
    if (!ids.insert(traj.id).second) {
      throw ValidationError("duplicate trajectory id '" + traj.id + "'");
    }
  }
}

Dataset Dataset::from_trajectories(std::vector<Trajectory> trajectories, std::string source_path) {
  Dataset ds;
  ds.action_dim = trajectories.empty() ? 0 : trajectories.front().action_dim();
  ds.trajectories = std::move(trajectories);
  ds.source_path = std::move(source_path);
  ds.validate();
  return ds;
}

bool same_content(const Dataset& a, const Dataset& b) {
  return a.action_dim == b.action_dim && a.trajectories == b.trajectories;
}

Format parse_format(std::string_view name) {
  if (name == "jsonl") return Format::jsonl;
  if (name == "csv") return Format::csv;
  throw ValidationError("unknown format '" + std::string(name) + "' (expected jsonl or csv)");
}

std::string_view to_string(Format format) {
  return format == Format::jsonl ? "jsonl" : "csv";
}

Format format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? Format::csv : Format::jsonl;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

std::vector<std::vector<double>> parse_rows(const json& node, const char* field,
                                            std::size_t line) {
  if (!node.is_array()) throw ParseError(std::string("'") + field + "' must be an array", line);
  std::vector<std::vector<double>> rows;
  rows.reserve(node.size());
  for (const auto& row : node) {
    if (!row.is_array()) {
      throw ParseError(std::string("'") + field + "' entries must be arrays", line);
    }
    std::vector<double> values;
    values.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number()) throw ParseError(std::string("non-numeric value in '") + field + "'", line);
      values.push_back(v.get<double>());
    }
    rows.push_back(std::move(values));
  }
  return rows;
}

Trajectory parse_jsonl_record(const std::string& text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!obj.is_object()) throw ParseError("record is not a JSON object", line);

  Trajectory traj;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string()) throw ParseError("missing string field 'id'", line);
  traj.id = id->get<std::string>();

  auto actions = obj.find("actions");
  if (actions == obj.end()) throw ParseError("missing field 'actions'", line);
  traj.actions = parse_rows(*actions, "actions", line);

  if (auto states = obj.find("states"); states != obj.end() && !states->is_null()) {
    traj.states = parse_rows(*states, "states", line);
  }
  if (auto meta = obj.find("meta"); meta != obj.end() && !meta->is_null()) {
    if (!meta->is_object()) throw ParseError("'meta' must be an object", line);
    for (const auto& [key, value] : meta->items()) {
      if (!value.is_string()) throw ParseError("meta value for '" + key + "' is not a string", line);
      traj.meta[key] = value.get<std::string>();
    }
  }
  try {
    traj.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }
  return traj;
}

void write_rows(std::ostream& out, const std::vector<std::vector<double>>& rows) {
  out << '[';
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (t) out << ',';
    out << '[';
    for (std::size_t d = 0; d < rows[t].size(); ++d) {
      if (d) out << ',';
      out << format_number(rows[t][d]);
    }
    out << ']';
  }
  out << ']';
}

void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const auto& traj : ds.trajectories) {
    out << "{\"id\":" << json(traj.id).dump() << ",\"actions\":";
    write_rows(out, traj.actions);
    if (traj.states) {
      out << ",\"states\":";
      write_rows(out, *traj.states);
    }
    json meta = json::object();
    for (const auto& [k, v] : traj.meta) meta[k] = v;
    out << ",\"meta\":" << meta.dump() << "}\n";
  }
}

Dataset read_jsonl(std::istream& in, std::string source_path) {
  std::vector<Trajectory> trajectories;
  std::string text;
  std::size_t line = 0;
  std::set<std::string> ids;
  std::size_t dim = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Trajectory traj = parse_jsonl_record(text, line);
    if (trajectories.empty()) {
      dim = traj.action_dim();
    } else if (traj.action_dim() != dim) {
      throw ParseError("inconsistent action dimension: trajectory '" + traj.id + "' has " +
                           std::to_string(traj.action_dim()) + ", expected " + std::to_string(dim),
                       line);
    }
    if (!ids.insert(traj.id).second) throw ParseError("duplicate trajectory id '" + traj.id + "'", line);
    trajectories.push_back(std::move(traj));
  }
  if (trajectories.empty()) throw ValidationError("empty dataset file " + source_path);
  return Dataset::from_trajectories(std::move(trajectories), std::move(source_path));
}

// ---------------------------------------------------------------------------
// CSV: traj_id,t,a0..a{D-1}[,s0..s{S-1}], one row per timestep.

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t line, std::string_view column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("cannot parse '" + std::string(field) + "' in column " + std::string(column),
                     line);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value '" + std::string(field) + "' in column " +
                         std::string(column),
                     line);
  }
  return value;
}

Dataset read_csv(std::istream& in, std::string source_path) {
  std::string text;
  std::size_t line = 0;
  std::vector<std::string> header;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty() || text.front() == '#') continue;
    for (auto f : split_commas(text)) header.emplace_back(trim(f));
    break;
  }
  if (header.empty()) throw ValidationError("empty dataset file " + source_path);
  if (header.size() < 3 || header[0] != "traj_id" || header[1] != "t") {
    throw ParseError("CSV header must start with traj_id,t,a0", line);
  }
  std::size_t action_dim = 0;
  std::size_t state_dim = 0;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const bool is_action = state_dim == 0 && header[c] == "a" + std::to_string(action_dim);
    if (is_action) {
      ++action_dim;
    } else if (header[c] == "s" + std::to_string(state_dim)) {
      ++state_dim;
    } else {
      throw ParseError("unexpected CSV column '" + header[c] + "'", line);
    }
  }
  if (action_dim == 0) throw ParseError("CSV header has no action columns", line);

  std::vector<Trajectory> trajectories;
  std::set<std::string> finished;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty() || text.front() == '#') continue;
    const auto fields = split_commas(text);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line);
    }
    const std::string id(trim(fields[0]));
    if (id.empty()) throw ParseError("empty traj_id", line);
    std::size_t t = 0;
    {
      const auto tf = trim(fields[1]);
      const auto [ptr, ec] = std::from_chars(tf.data(), tf.data() + tf.size(), t);
      if (ec != std::errc() || ptr != tf.data() + tf.size() || tf.empty()) {
        throw ParseError("invalid timestep '" + std::string(tf) + "'", line);
      }
    }
    if (trajectories.empty() || trajectories.back().id != id) {
      if (!trajectories.empty()) finished.insert(trajectories.back().id);
      if (finished.count(id)) throw ParseError("rows of trajectory '" + id + "' are not contiguous", line);
      Trajectory traj;
      traj.id = id;
      if (state_dim) traj.states.emplace();
      trajectories.push_back(std::move(traj));
    }
    Trajectory& traj = trajectories.back();
    if (t != traj.length()) {
      throw ParseError("trajectory '" + id + "': expected t=" + std::to_string(traj.length()) +
                           ", got " + std::to_string(t),
                       line);
    }
    ActionVector action(action_dim);
    for (std::size_t d = 0; d < action_dim; ++d) action[d] = parse_double(fields[2 + d], line, header[2 + d]);
    traj.actions.push_back(std::move(action));
    if (state_dim) {
      std::vector<double> state(state_dim);
      for (std::size_t d = 0; d < state_dim; ++d) {
        state[d] = parse_double(fields[2 + action_dim + d], line, header[2 + action_dim + d]);
      }
      traj.states->push_back(std::move(state));
    }
  }
  if (trajectories.empty()) throw ValidationError("dataset file has a header but no rows: " + source_path);
  return Dataset::from_trajectories(std::move(trajectories), std::move(source_path));
}

void write_csv(const Dataset& ds, std::ostream& out) {
  std::size_t state_dim = 0;
  bool any_states = false;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const auto& traj = ds.trajectories[i];
    const bool has = traj.states.has_value();
    const std::size_t sdim = has ? traj.states->front().size() : 0;
    if (i == 0) {
      any_states = has;
      state_dim = sdim;
    } else if (has != any_states || sdim != state_dim) {
      throw ValidationError("CSV output needs states on all trajectories or none, with one state dimension");
    }
  }
  out << "traj_id,t";
  for (std::size_t d = 0; d < ds.action_dim; ++d) out << ",a" << d;
  for (std::size_t d = 0; d < state_dim; ++d) out << ",s" << d;
  out << '\n';
  for (const auto& traj : ds.trajectories) {
    if (traj.id.find_first_of(",\n\r") != std::string::npos) {
      throw ValidationError("trajectory id '" + traj.id + "' cannot be written to CSV");
    }
    for (std::size_t t = 0; t < traj.length(); ++t) {
      out << traj.id << ',' << t;
      for (double v : traj.actions[t]) out << ',' << format_number(v);
      if (any_states) {
        for (double v : (*traj.states)[t]) out << ',' << format_number(v);
      }
      out << '\n';
    }
  }
}

}  // namespace

Dataset read_dataset(std::istream& in, Format format, std::string source_path) {
  return format == Format::jsonl ? read_jsonl(in, std::move(source_path))
                                 : read_csv(in, std::move(source_path));
}

void write_dataset(const Dataset& ds, std::ostream& out, Format format) {
  ds.validate();
  if (format == Format::jsonl) {
    write_jsonl(ds, out);
  } else {
    write_csv(ds, out);
  }
}

Dataset ingest(const std::filesystem::path& path, Format format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  return read_dataset(in, format, path.string());
}

void serialize(const Dataset& ds, const std::filesystem::path& path, Format format) {
  std::ostringstream buffer;
  write_dataset(ds, buffer, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << buffer.str();
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

Trajectory clean(const Trajectory& traj, const CleanOptions& options) {
  traj.validate();
  const std::size_t dim = traj.action_dim();
  if (!(options.drop_static_threshold >= 0.0) || !std::isfinite(options.drop_static_threshold)) {
    throw ValidationError("drop_static_threshold must be a finite nonnegative number");
  }
  if (options.smooth_window == 0 || options.smooth_window % 2 == 0) {
    throw ValidationError("smooth_window must be a positive odd integer");
  }
  if (options.smooth_window > traj.length()) {
    throw ValidationError("smooth_window " + std::to_string(options.smooth_window) +
                          " exceeds trajectory length " + std::to_string(traj.length()));
  }

  std::optional<std::size_t> gripper;
  if (options.has_gripper) {
    if (options.gripper_dim) {
      gripper = options.gripper_dim;
    } else if (dim > 1) {
      gripper = dim - 1;
    }
  }
  if (gripper && *gripper >= dim) throw ValidationError("gripper dimension out of range");

  std::vector<std::size_t> motion;
  if (options.motion_mask) {
    options.motion_mask->check_fits(dim);
    motion = options.motion_mask->indices();
  } else {
    for (std::size_t d = 0; d < dim; ++d) {
      if (!gripper || d != *gripper) motion.push_back(d);
    }
  }

  // A removed step always repeats the previous gripper command, so tracking the
  // reference over all steps is the same as tracking it over survivors.
  std::vector<std::size_t> keep;
  double previous_gripper = options.initial_gripper;
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const auto& a = traj.actions[t];
    double sq = 0.0;
    for (std::size_t d : motion) sq += a[d] * a[d];
    const bool gripper_unchanged = !gripper || a[*gripper] == previous_gripper;
    if (!(std::sqrt(sq) <= options.drop_static_threshold && gripper_unchanged)) keep.push_back(t);
    if (gripper) previous_gripper = a[*gripper];
  }
  if (keep.empty()) {
    throw ValidationError("cleaning removes every timestep of trajectory '" + traj.id + "'");
  }

  Trajectory out;
  out.id = traj.id;
  out.meta = traj.meta;
  out.actions.reserve(keep.size());
  for (std::size_t t : keep) out.actions.push_back(traj.actions[t]);
  if (traj.states) {
    out.states.emplace();
    for (std::size_t t : keep) out.states->push_back((*traj.states)[t]);
  }

  if (options.smooth_window > 1) {
    const std::size_t n = out.length();
    const std::size_t half = options.smooth_window / 2;
    std::vector<ActionVector> smoothed = out.actions;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t lo = t >= half ? t - half : 0;
      const std::size_t hi = std::min(n - 1, t + half);
      const double count = static_cast<double>(hi - lo + 1);
      for (std::size_t d = 0; d < dim; ++d) {
        if (gripper && d == *gripper) continue;
        // Averaging deviations from the centre keeps constant runs exact.
        const double centre = out.actions[t][d];
        double dev = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) dev += out.actions[j][d] - centre;
        smoothed[t][d] = centre + dev / count;
      }
    }
    out.actions = std::move(smoothed);
  }
  return out;
}

}  // namespace velatt

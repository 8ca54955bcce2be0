#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "velatt/dim_mask.hpp"
#include "velatt/matrix.hpp"

namespace velatt {

using ActionVector = std::vector<double>;

/// A demonstration: T action vectors of dimension D, optional per-step states
/// and free-form string metadata (task name, seed, speed profile, ...).
struct Trajectory {
  std::string id;
  std::vector<ActionVector> actions;
  std::optional<std::vector<std::vector<double>>> states;
  std::map<std::string, std::string> meta;

  std::size_t length() const noexcept { return actions.size(); }
  std::size_t action_dim() const noexcept { return actions.empty() ? 0 : actions.front().size(); }

  /// Throws ValidationError on T = 0, ragged D, state/action length mismatch
  /// or any non-finite entry.
  void validate() const;

  /// Actions as a T x D block.
  Matrix action_matrix() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::size_t action_dim = 0;
  std::string source_path;

  /// Validates every trajectory, shared D and id uniqueness.
  void validate() const;

  bool empty() const noexcept { return trajectories.empty(); }
  std::size_t size() const noexcept { return trajectories.size(); }

  /// Builds and validates a dataset, deriving action_dim from the members.
  static Dataset from_trajectories(std::vector<Trajectory> trajectories,
                                   std::string source_path = {});
};

/// Content equality ignoring `source_path`.
bool same_content(const Dataset& a, const Dataset& b);

enum class Format { jsonl, csv };

Format parse_format(std::string_view name);
std::string_view to_string(Format format);
/// Picks a format from the file extension (".csv" or anything else -> jsonl).
Format format_from_path(const std::filesystem::path& path);

// Numeric text is written with this many significant digits.
inline constexpr int kSerializePrecision = 9;

Dataset read_dataset(std::istream& in, Format format, std::string source_path = {});
void write_dataset(const Dataset& ds, std::ostream& out, Format format);

Dataset ingest(const std::filesystem::path& path, Format format);
void serialize(const Dataset& ds, const std::filesystem::path& path, Format format);

struct CleanOptions {
  double drop_static_threshold = 0.0;
  std::size_t smooth_window = 1;
  /// Gripper dimension; `std::nullopt` means the last dimension when D > 1
  /// and no gripper when D == 1.
  std::optional<std::size_t> gripper_dim;
  bool has_gripper = true;
  /// Dimensions used for the static test; defaults to all non-gripper dims.
  std::optional<DimMask> motion_mask;
  /// Gripper command assumed before the first step.
  double initial_gripper = 0.0;
};

/// Drops static steps (motion magnitude <= threshold with an unchanged gripper
/// command) and applies a centered moving average of odd width to the
/// non-gripper dimensions. The window is truncated at the sequence ends.
Trajectory clean(const Trajectory& traj, const CleanOptions& options);

}  // namespace velatt

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace velatt {

/// Non-empty, sorted, duplicate-free set of action dimension indices.
class DimMask {
 public:
  explicit DimMask(std::vector<std::size_t> indices);

  /// Indices [first, last).
  static DimMask range(std::size_t first, std::size_t last);

  /// Parses "0-5", "0,1,2" or mixtures like "0-2,5".
  static DimMask parse(std::string_view text);

  /// {0..D-2} for D > 1 (the last dimension is the gripper), {0} for D == 1.
  static DimMask default_for(std::size_t action_dim);

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool contains(std::size_t index) const;

  /// Throws ValidationError when any index is >= action_dim.
  void check_fits(std::size_t action_dim) const;

  std::string to_string() const;

  friend bool operator==(const DimMask&, const DimMask&) = default;

 private:
  std::vector<std::size_t> indices_;
};

}  // namespace velatt

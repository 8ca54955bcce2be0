#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "velatt/velocity.hpp"

namespace velatt {

/// Velocity-to-weight maps. All are non-increasing in speed.
enum class Strategy { inverse, inverse_squared, exp_decay, log };

inline constexpr Strategy kAllStrategies[] = {Strategy::inverse, Strategy::inverse_squared,
                                              Strategy::exp_decay, Strategy::log};

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

struct WeightingConfig {
  Strategy strategy = Strategy::inverse_squared;
  double alpha = 5.0;       // exp_decay rate
  double eps_floor = 1e-6;  // speeds are floored here before mapping
  double clip_max = 2.0;    // weights clipped to [1/clip_max, clip_max]
  bool normalize = true;    // rescale each trajectory's weights to mean 1

  /// Throws ValidationError unless clip_max >= 1, alpha > 0, eps_floor > 0.
  void validate() const;

  friend bool operator==(const WeightingConfig&, const WeightingConfig&) = default;
};

/// F_A(max(v, eps_floor)) for the configured strategy.
double raw_weight(double v, const WeightingConfig& cfg);

std::vector<double> clip_weights(std::span<const double> raw, double clip_max);

/// Divides by the arithmetic mean. Inputs must be positive.
std::vector<double> normalize_weights(std::span<const double> weights);

/// Per-step weights with every pipeline stage kept for export. `clipped` is
/// the bounded stage; `values` may leave the clip interval by the
/// normalization factor.
struct WeightProfile {
  std::vector<double> velocity;
  std::vector<double> raw;
  std::vector<double> clipped;
  std::vector<double> values;
  WeightingConfig config;
  std::string source_id;

  std::size_t size() const noexcept { return values.size(); }
};

/// raw_weight -> clip_weights -> normalize_weights (when enabled).
WeightProfile weight_profile(const VelocityField& field, const WeightingConfig& cfg);

/// Constant-1 profile of length `length`.
WeightProfile uniform_profile(std::size_t length, std::string source_id = {});

/// `traj_id,t,v,w_raw,w_clipped,w_final` rows for the given profiles (no header).
void write_weight_rows(std::span<const WeightProfile> profiles, std::ostream& out);
inline constexpr std::string_view kWeightCsvHeader = "traj_id,t,v,w_raw,w_clipped,w_final";

}  // namespace velatt

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "velatt/dim_mask.hpp"
#include "velatt/trajectory.hpp"

namespace velatt {

/// Per-timestep speed v_t = ||a_t restricted to the mask||_2. Actions are
/// per-step deltas, so no time scaling is applied.
struct VelocityField {
  std::vector<double> values;
  std::string source_id;
  DimMask mask;
};

VelocityField compute_velocity(const Trajectory& traj, const DimMask& mask);

/// One field per trajectory, in dataset order.
std::vector<VelocityField> batch_velocity(const Dataset& ds, const DimMask& mask);

struct VelocityStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double q10 = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
};

/// Quantile of already sorted values by linear interpolation between the
/// closest ranks: position h = (n - 1) * p, result x[floor h] + frac(h) * gap.
double quantile_sorted(std::span<const double> sorted, double p);

VelocityStats velocity_stats(const VelocityField& field);

/// Writes `traj_id,t,v` rows (with header) for every field.
void write_velocity_csv(std::span<const VelocityField> fields, std::ostream& out);

}  // namespace velatt

#include "velatt/velocity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "velatt/error.hpp"

namespace velatt {

DimMask::DimMask(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (indices_.empty()) throw ValidationError("dimension mask is empty");
}

DimMask DimMask::range(std::size_t first, std::size_t last) {
  std::vector<std::size_t> idx;
  for (std::size_t i = first; i < last; ++i) idx.push_back(i);
  return DimMask(std::move(idx));
}

DimMask DimMask::parse(std::string_view text) {
  auto to_index = [&](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ValidationError("invalid mask '" + std::string(text) + "'");
    }
    return v;
  };
  std::vector<std::size_t> idx;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view part = text.substr(start, comma - start);
    if (const auto dash = part.find('-'); dash != std::string_view::npos) {
      const std::size_t lo = to_index(part.substr(0, dash));
      const std::size_t hi = to_index(part.substr(dash + 1));
      if (hi < lo) throw ValidationError("invalid mask range '" + std::string(part) + "'");
      for (std::size_t i = lo; i <= hi; ++i) idx.push_back(i);
    } else {
      idx.push_back(to_index(part));
    }
    start = comma + 1;
  }
  return DimMask(std::move(idx));
}

DimMask DimMask::default_for(std::size_t action_dim) {
  if (action_dim == 0) throw ValidationError("action dimension must be positive");
  return action_dim == 1 ? DimMask({0}) : range(0, action_dim - 1);
}

bool DimMask::contains(std::size_t index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

void DimMask::check_fits(std::size_t action_dim) const {
  if (indices_.back() >= action_dim) {
    throw ValidationError("mask index " + std::to_string(indices_.back()) +
                          " out of range for action dimension " + std::to_string(action_dim));
  }
}

std::string DimMask::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    std::size_t j = i;
    while (j + 1 < indices_.size() && indices_[j + 1] == indices_[j] + 1) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(indices_[i]);
    if (j > i) out += '-' + std::to_string(indices_[j]);
    i = j;
  }
  return out;
}

VelocityField compute_velocity(const Trajectory& traj, const DimMask& mask) {
  mask.check_fits(traj.action_dim());
  VelocityField field{{}, traj.id, mask};
  field.values.reserve(traj.length());
  for (const auto& a : traj.actions) {
    double sq = 0.0;
    for (std::size_t d : mask.indices()) sq += a[d] * a[d];
    field.values.push_back(std::sqrt(sq));
  }
  return field;
}

std::vector<VelocityField> batch_velocity(const Dataset& ds, const DimMask& mask) {
  std::vector<VelocityField> out;
  out.reserve(ds.size());
  if (!ds.empty()) mask.check_fits(ds.action_dim);
  for (const auto& traj : ds.trajectories) out.push_back(compute_velocity(traj, mask));
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sequence");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

VelocityStats velocity_stats(const VelocityField& field) {
  if (field.values.empty()) throw ValidationError("velocity field '" + field.source_id + "' is empty");
  std::vector<double> sorted = field.values;
  std::sort(sorted.begin(), sorted.end());
  VelocityStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  // Mean of a constant sequence can drift by an ulp; clamp into [min, max].
  s.mean = std::clamp(s.mean, s.min, s.max);
  s.q10 = quantile_sorted(sorted, 0.1);
  s.q50 = quantile_sorted(sorted, 0.5);
  s.q90 = quantile_sorted(sorted, 0.9);
  return s;
}

void write_velocity_csv(std::span<const VelocityField> fields, std::ostream& out) {
  out << "traj_id,t,v\n";
  char buf[64];
  for (const auto& f : fields) {
    for (std::size_t t = 0; t < f.values.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.*g", kSerializePrecision, f.values[t]);
      out << f.source_id << ',' << t << ',' << buf << '\n';
    }
  }
}

}  // namespace velatt

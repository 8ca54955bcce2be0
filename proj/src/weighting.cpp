#include "velatt/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "velatt/error.hpp"

namespace velatt {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::inverse: return "inverse";
    case Strategy::inverse_squared: return "inverse_squared";
    case Strategy::exp_decay: return "exp_decay";
    case Strategy::log: return "log";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown weighting strategy '" + std::string(name) + "'");
}

void WeightingConfig::validate() const {
  if (!(clip_max >= 1.0) || !std::isfinite(clip_max)) {
    throw ValidationError("clip_max must be a finite number >= 1");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
  if (!(eps_floor > 0.0) || !std::isfinite(eps_floor)) throw ValidationError("eps_floor must be positive");
}

double raw_weight(double v, const WeightingConfig& cfg) {
  const double s = std::max(v, cfg.eps_floor);
  switch (cfg.strategy) {
    case Strategy::inverse: return 1.0 / s;
    case Strategy::inverse_squared: return 1.0 / (s * s);
    case Strategy::exp_decay: return std::exp(-cfg.alpha * s);
    case Strategy::log: return 1.0 / std::log1p(s);
  }
  return 1.0;
}

std::vector<double> clip_weights(std::span<const double> raw, double clip_max) {
  if (!(clip_max >= 1.0)) throw ValidationError("clip_max must be >= 1");
  const double lo = 1.0 / clip_max;
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::min(std::max(raw[i], lo), clip_max);
  return out;
}

std::vector<double> normalize_weights(std::span<const double> weights) {
  if (weights.empty()) throw ValidationError("cannot normalize an empty weight vector");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("weights must be positive to normalize");
    sum += w;
  }
  // A summed constant can miss n * c by an ulp, so constant input is mapped directly.
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  if (*lo == *hi) return std::vector<double>(weights.size(), 1.0);
  const double mean = sum / static_cast<double>(weights.size());
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / mean;
  return out;
}

WeightProfile weight_profile(const VelocityField& field, const WeightingConfig& cfg) {
  cfg.validate();
  if (field.values.empty()) throw ValidationError("velocity field '" + field.source_id + "' is empty");
  WeightProfile p;
  p.velocity = field.values;
  p.config = cfg;
  p.source_id = field.source_id;
  p.raw.reserve(field.values.size());
  for (double v : field.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("velocity must be finite and nonnegative");
    p.raw.push_back(raw_weight(v, cfg));
  }
  p.clipped = clip_weights(p.raw, cfg.clip_max);
  p.values = cfg.normalize ? normalize_weights(p.clipped) : p.clipped;
  return p;
}

WeightProfile uniform_profile(std::size_t length, std::string source_id) {
  WeightProfile p;
  p.velocity.assign(length, 0.0);
  p.raw.assign(length, 1.0);
  p.clipped.assign(length, 1.0);
  p.values.assign(length, 1.0);
  p.config.clip_max = 1.0;
  p.source_id = std::move(source_id);
  return p;
}

void write_weight_rows(std::span<const WeightProfile> profiles, std::ostream& out) {
  char buf[256];
  for (const auto& p : profiles) {
    for (std::size_t t = 0; t < p.values.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g", t, p.velocity[t], p.raw[t],
                    p.clipped[t], p.values[t]);
      out << p.source_id << ',' << buf << '\n';
    }
  }
}

}  // namespace velatt

#include "velatt/objectives.hpp"

#include <cmath>
#include <string>

#include "velatt/error.hpp"

namespace velatt {

namespace {

void check_shapes(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
  if (a.empty()) throw ValidationError(std::string(what) + ": empty block");
}

void check_weights(const Matrix& a, std::span<const double> w, const char* what) {
  if (w.size() != a.rows()) {
    throw ValidationError(std::string(what) + ": " + std::to_string(w.size()) + " weights for " +
                          std::to_string(a.rows()) + " timesteps");
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// The weighted and unweighted variants below are written as separate loops with
// identical accumulation order: a unit weight multiplies exactly, so the two
// agree bit for bit without one calling the other.

}  // namespace

LossValue weighted_l1(const Matrix& pred, const Matrix& gt, std::span<const double> weights) {
  check_shapes(pred, gt, "weighted_l1");
  check_weights(pred, weights, "weighted_l1");
  const double n = static_cast<double>(pred.size());
  LossValue out{0.0, Matrix(pred.rows(), pred.cols())};
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.rows(); ++t) {
    const double w = weights[t];
    for (std::size_t d = 0; d < pred.cols(); ++d) {
      const double r = pred(t, d) - gt(t, d);
      sum += w * std::abs(r);
      out.grad(t, d) = w * sign(r) / n;
    }
  }
  out.value = sum / n;
  return out;
}

LossValue weighted_l1(const Matrix& pred, const Matrix& gt, const WeightProfile& weights) {
  return weighted_l1(pred, gt, weights.values);
}

LossValue unweighted_l1(const Matrix& pred, const Matrix& gt) {
  check_shapes(pred, gt, "unweighted_l1");
  const double n = static_cast<double>(pred.size());
  LossValue out{0.0, Matrix(pred.rows(), pred.cols())};
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.rows(); ++t) {
    for (std::size_t d = 0; d < pred.cols(); ++d) {
      const double r = pred(t, d) - gt(t, d);
      sum += std::abs(r);
      out.grad(t, d) = sign(r) / n;
    }
  }
  out.value = sum / n;
  return out;
}

LossValue flow_matching_loss(const Matrix& u_pred, const Matrix& gt, const Matrix& eps,
                             std::span<const double> weights) {
  check_shapes(u_pred, gt, "flow_matching_loss");
  check_shapes(u_pred, eps, "flow_matching_loss");
  check_weights(u_pred, weights, "flow_matching_loss");
  const double n = static_cast<double>(u_pred.size());
  LossValue out{0.0, Matrix(u_pred.rows(), u_pred.cols())};
  double sum = 0.0;
  for (std::size_t t = 0; t < u_pred.rows(); ++t) {
    const double w = weights[t];
    for (std::size_t d = 0; d < u_pred.cols(); ++d) {
      const double r = u_pred(t, d) - (gt(t, d) - eps(t, d));
      sum += w * (r * r);
      out.grad(t, d) = 2.0 * w * r / n;
    }
  }
  out.value = sum / n;
  return out;
}

LossValue flow_matching_loss(const Matrix& u_pred, const Matrix& gt, const Matrix& eps,
                             const WeightProfile& weights) {
  return flow_matching_loss(u_pred, gt, eps, weights.values);
}

LossValue unweighted_flow_matching_loss(const Matrix& u_pred, const Matrix& gt, const Matrix& eps) {
  check_shapes(u_pred, gt, "unweighted_flow_matching_loss");
  check_shapes(u_pred, eps, "unweighted_flow_matching_loss");
  const double n = static_cast<double>(u_pred.size());
  LossValue out{0.0, Matrix(u_pred.rows(), u_pred.cols())};
  double sum = 0.0;
  for (std::size_t t = 0; t < u_pred.rows(); ++t) {
    for (std::size_t d = 0; d < u_pred.cols(); ++d) {
      const double r = u_pred(t, d) - (gt(t, d) - eps(t, d));
      sum += r * r;
      out.grad(t, d) = 2.0 * r / n;
    }
  }
  out.value = sum / n;
  return out;
}

void DiffusionSchedule::validate() const {
  if (alphas.empty()) throw ValidationError("diffusion schedule has no steps");
  if (alphas.size() != betas.size()) throw ValidationError("diffusion schedule: alphas/betas length mismatch");
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 0.0 && alphas[k] <= 1.0)) throw ValidationError("diffusion alpha outside (0, 1]");
    if (!(betas[k] >= 0.0) || !std::isfinite(betas[k])) throw ValidationError("diffusion beta must be >= 0");
    if (k > 0 && !(alphas[k] < alphas[k - 1])) throw ValidationError("diffusion alphas must strictly decrease");
    if (k > 0 && !(betas[k] > betas[k - 1])) throw ValidationError("diffusion betas must strictly increase");
  }
}

DiffusionSchedule DiffusionSchedule::make_default(std::size_t steps) {
  if (steps == 0) throw ValidationError("diffusion schedule needs at least one step");
  DiffusionSchedule s;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double beta = 0.9 * std::sqrt(static_cast<double>(k) / static_cast<double>(steps));
    s.betas.push_back(beta);
    s.alphas.push_back(std::sqrt(1.0 - beta * beta));
  }
  return s;
}

Matrix diffusion_forward(const Matrix& gt, std::size_t k, const Matrix& eps_k,
                         const DiffusionSchedule& schedule) {
  check_shapes(gt, eps_k, "diffusion_forward");
  if (k < 1 || k > schedule.steps()) {
    throw ValidationError("diffusion step " + std::to_string(k) + " outside 1.." +
                          std::to_string(schedule.steps()));
  }
  const double a = schedule.alphas[k - 1];
  const double b = schedule.betas[k - 1];
  Matrix out(gt.rows(), gt.cols());
  for (std::size_t i = 0; i < gt.size(); ++i) out.data()[i] = a * gt.data()[i] + b * eps_k.data()[i];
  return out;
}

LossValue diffusion_loss(const Matrix& eps_pred, const Matrix& eps_k, std::span<const double> weights) {
  check_shapes(eps_pred, eps_k, "diffusion_loss");
  check_weights(eps_pred, weights, "diffusion_loss");
  const double n = static_cast<double>(eps_pred.size());
  LossValue out{0.0, Matrix(eps_pred.rows(), eps_pred.cols())};
  double sum = 0.0;
  for (std::size_t t = 0; t < eps_pred.rows(); ++t) {
    const double w = weights[t];
    for (std::size_t d = 0; d < eps_pred.cols(); ++d) {
      const double r = eps_pred(t, d) - eps_k(t, d);
      sum += w * (r * r);
      out.grad(t, d) = 2.0 * w * r / n;
    }
  }
  out.value = sum / n;
  return out;
}

LossValue diffusion_loss(const Matrix& eps_pred, const Matrix& eps_k, const WeightProfile& weights) {
  return diffusion_loss(eps_pred, eps_k, weights.values);
}

LossValue unweighted_diffusion_loss(const Matrix& eps_pred, const Matrix& eps_k) {
  check_shapes(eps_pred, eps_k, "unweighted_diffusion_loss");
  const double n = static_cast<double>(eps_pred.size());
  LossValue out{0.0, Matrix(eps_pred.rows(), eps_pred.cols())};
  double sum = 0.0;
  for (std::size_t t = 0; t < eps_pred.rows(); ++t) {
    for (std::size_t d = 0; d < eps_pred.cols(); ++d) {
      const double r = eps_pred(t, d) - eps_k(t, d);
      sum += r * r;
      out.grad(t, d) = 2.0 * r / n;
    }
  }
  out.value = sum / n;
  return out;
}

}  // namespace velatt

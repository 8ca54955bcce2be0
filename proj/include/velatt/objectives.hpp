#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "velatt/matrix.hpp"
#include "velatt/weighting.hpp"

namespace velatt {

/// Scalar loss with its gradient with respect to the prediction block.
struct LossValue {
  double value = 0.0;
  Matrix grad;
};

// All objectives average over the T x D block and weight row t by w_t.
// Callers supply every random draw (eps, k) so results are deterministic.

/// (1/TD) sum w_t |pred - gt|; the gradient uses sign(0) = 0.
LossValue weighted_l1(const Matrix& pred, const Matrix& gt, std::span<const double> weights);
LossValue weighted_l1(const Matrix& pred, const Matrix& gt, const WeightProfile& weights);
LossValue unweighted_l1(const Matrix& pred, const Matrix& gt);

/// Regresses u_pred onto the target field gt - eps.
LossValue flow_matching_loss(const Matrix& u_pred, const Matrix& gt, const Matrix& eps,
                             std::span<const double> weights);
LossValue flow_matching_loss(const Matrix& u_pred, const Matrix& gt, const Matrix& eps,
                             const WeightProfile& weights);
LossValue unweighted_flow_matching_loss(const Matrix& u_pred, const Matrix& gt, const Matrix& eps);

/// Forward-process coefficients a^(k) = alpha_k gt + beta_k eps, k = 1..K.
struct DiffusionSchedule {
  std::vector<double> alphas;
  std::vector<double> betas;

  std::size_t steps() const noexcept { return alphas.size(); }

  /// Lengths match, alphas in (0, 1] strictly decreasing, betas >= 0 strictly increasing.
  void validate() const;

  /// beta_k = 0.9 sqrt(k / K), alpha_k = sqrt(1 - beta_k^2).
  static DiffusionSchedule make_default(std::size_t steps = 50);
};

/// Noisy block at step k (1-based).
Matrix diffusion_forward(const Matrix& gt, std::size_t k, const Matrix& eps_k,
                         const DiffusionSchedule& schedule);

/// (1/TD) sum w_t (eps_pred - eps_k)^2.
LossValue diffusion_loss(const Matrix& eps_pred, const Matrix& eps_k, std::span<const double> weights);
LossValue diffusion_loss(const Matrix& eps_pred, const Matrix& eps_k, const WeightProfile& weights);
LossValue unweighted_diffusion_loss(const Matrix& eps_pred, const Matrix& eps_k);

}  // namespace velatt

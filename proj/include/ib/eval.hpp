#pragma once

#include <cstdint>
#include <vector>

#include "ib/data.hpp"
#include "ib/model.hpp"
#include "ib/numerics.hpp"

namespace ib {

struct Metrics {
  double overall = 0.0;
  Vector per_class;     // diagonal / row sum of the confusion matrix
  double top_k = 0.0;
  int k = 1;
  Matrix confusion;     // row = true class, column = predicted class
};

// Argmax accuracy with the model's smallest-index tie rule; top-k counts a
// sample whose label ranks within the k largest logits.
Metrics evaluate(const MLPParams& model, const Dataset& test, int k_for_topk);

struct InfluenceReport {
  Vector raw;         // per-sample ||f - y||_1 * ||h||_1
  Vector normalized;  // dataset-global min-max scaling into [0, 1]
  std::vector<std::vector<std::size_t>> top_per_class;  // descending, index tie-break
  Vector class_mean_normalized;
};

// When every raw factor is identical the min-max scaling is degenerate and
// all normalized values map to 0.
InfluenceReport influence_report(const MLPParams& model, const Dataset& ds, std::size_t top_m);

struct ExactInfluence {
  Matrix hessian;                  // P x P over the final-layer weights, P = K * L
  std::vector<Vector> influence;   // per sample: -(H + damping I)^-1 grad
  Vector l1_norms;
  double damping = 0.0;
};

// Full influence-function oracle over the final-layer weight matrix. The
// Hessian uses the softmax-CE closed form (diag(f) - f f^T) (x) h h^T
// averaged over the dataset; each sample's system is solved densely.
// A singular system (typically damping = 0) is reported so the caller can
// retry with damping.
ExactInfluence exact_influence(const MLPParams& model, const Dataset& ds, double damping);

struct ConvexFitOptions {
  int max_iters = 200;
  double grad_tol = 1e-8;  // L2 norm of the mean-CE gradient
  double damping = 1e-8;   // Newton-step regularization
};

// Full-batch damped Newton fit of a bias-free linear softmax classifier
// from zero initialization; deterministic. exclude_index = -1 fits all
// samples. Throws if the gradient tolerance is not reached.
Matrix fit_linear_softmax(const Dataset& ds, int exclude_index,
                          const ConvexFitOptions& options = {});

// Retrains without sample i from the same (zero) initialization and returns
// the L1 norm of the parameter change against the full fit.
double leave_one_out(const Dataset& ds, std::size_t i, const Matrix& w_full,
                     const ConvexFitOptions& options = {});
double leave_one_out(const Dataset& ds, std::size_t i, const ConvexFitOptions& options = {});

// Spearman rank correlation with average ranks for ties; constant input has
// no defined rank correlation and is rejected.
double spearman_rank_corr(const Vector& a, const Vector& b);

}  // namespace ib

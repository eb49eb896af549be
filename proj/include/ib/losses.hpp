#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ib/model.hpp"
#include "ib/numerics.hpp"

namespace ib {

enum class LossKind { CE, Focal, CB, IB, IBFocal, IBCB };

// True for the kinds whose per-sample weight divides by the influence factor.
bool uses_ib_factor(LossKind kind);
std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct LossSpec {
  LossKind kind = LossKind::CE;
  double gamma = 2.0;     // Focal, IBFocal: modulating exponent, >= 0
  double beta = 0.999;    // CB, IBCB: effective-number decay, in [0, 1)
  double alpha = 0.0;     // IB, IBFocal: lambda scale; 0 selects the default (class count)
  double epsilon = 1e-3;  // IB family: denominator offset, > 0
  Norm ib_norm = Norm::L1;
  bool ib_use_factor = true;         // false: constant denominator (ablation variant)
  bool renormalize_weights = false;  // mean-one weight renormalization per batch
};

void validate(const LossSpec& spec);

// Eq-style class weights lambda_k = alpha * n_k^-1 / sum n_k'^-1; they sum
// to alpha and order inversely to the counts.
struct ClassWeights {
  Vector lambda;
  double alpha = 0.0;
  std::vector<std::int64_t> counts;
};

// -log f_y with f_y clamped below at 1e-12.
double cross_entropy(const Vector& probs, int label);

// (1 - f_y)^gamma * cross_entropy; gamma = 0 reduces to plain CE.
double focal(const Vector& probs, int label, double gamma);

// Effective-number weights (1 - beta) / (1 - beta^n_k), rescaled to sum to
// the class count.
Vector cb_weights(const std::vector<std::int64_t>& counts, double beta);

ClassWeights lambda_weights(const std::vector<std::int64_t>& counts, double alpha);

// The influence proxy ||f - y||_mode * ||h||_mode. Equals the norm of the
// final-layer weight gradient of CE for the same (f, h).
double ib_factor(const Vector& probs, const Vector& label_one_hot, const Vector& hidden,
                 Norm mode = Norm::L1);

struct WeightedLoss {
  double loss = 0.0;
  double weight = 0.0;
};

// weight = lambda_k / (ib_factor + epsilon); loss = weight * cross_entropy.
// Both are returned so training can log the weights.
WeightedLoss ib_loss(const Vector& probs, int label, const Vector& hidden, double lambda_k,
                     double epsilon);

// Per-class multiplier feeding batch_loss: all-ones for CE/Focal, lambda
// weights for IB/IBFocal, effective-number weights for CB/IBCB.
Vector class_multipliers(const LossSpec& spec, const std::vector<std::int64_t>& counts);

struct BatchSample {
  const ForwardTrace* trace = nullptr;
  int label = 0;
};

struct BatchLoss {
  double mean_loss = 0.0;
  Vector sample_weights;  // per-sample CE multiplier actually applied
};

// Mean per-sample loss under the spec. Every kind reduces to a per-sample
// multiplier on CE: 1 for CE, (1-f_y)^gamma for Focal, the class multiplier
// for CB, and class_multiplier / (factor + epsilon) for the IB kinds (with
// the focal term folded in for IBFocal). The multiplier is treated as a
// constant wherever gradients are taken.
BatchLoss batch_loss(const LossSpec& spec, const Vector& class_mult,
                     std::span<const BatchSample> batch);

}  // namespace ib

#include "ib/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ib {

namespace {

constexpr double kLogClamp = 1e-12;

void check_label(const Vector& probs, int label, const char* who) {
  if (probs.empty()) throw std::invalid_argument(std::string(who) + ": empty probability vector");
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw std::invalid_argument(std::string(who) + ": label " + std::to_string(label) +
                                " out of range [0, " + std::to_string(probs.size()) + ")");
  }
}

void check_counts(const std::vector<std::int64_t>& counts, const char* who) {
  if (counts.empty()) throw std::invalid_argument(std::string(who) + ": empty count vector");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 1) {
      throw std::invalid_argument(std::string(who) + ": class " + std::to_string(k) +
                                  " has count " + std::to_string(counts[k]) + ", need >= 1");
    }
  }
}

}  // namespace

bool uses_ib_factor(LossKind kind) {
  return kind == LossKind::IB || kind == LossKind::IBFocal || kind == LossKind::IBCB;
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::Focal: return "focal";
    case LossKind::CB: return "cb";
    case LossKind::IB: return "ib";
    case LossKind::IBFocal: return "ib_focal";
    case LossKind::IBCB: return "ib_cb";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "ce") return LossKind::CE;
  if (text == "focal") return LossKind::Focal;
  if (text == "cb") return LossKind::CB;
  if (text == "ib") return LossKind::IB;
  if (text == "ib_focal") return LossKind::IBFocal;
  if (text == "ib_cb") return LossKind::IBCB;
  throw std::invalid_argument("unknown loss kind '" + text +
                              "' (expected ce, focal, cb, ib, ib_focal or ib_cb)");
}

void validate(const LossSpec& spec) {
  if (spec.gamma < 0.0) throw std::invalid_argument("loss: gamma must be >= 0");
  if (spec.beta < 0.0 || spec.beta >= 1.0) {
    throw std::invalid_argument("loss: beta must lie in [0, 1)");
  }
  if (spec.alpha < 0.0) throw std::invalid_argument("loss: alpha must be > 0 (or 0 for the default)");
  if (spec.epsilon <= 0.0) throw std::invalid_argument("loss: epsilon must be > 0");
}

double cross_entropy(const Vector& probs, int label) {
  check_label(probs, label, "cross_entropy");
  const double f = probs[static_cast<std::size_t>(label)];
  return -std::log(f < kLogClamp ? kLogClamp : f);
}

double focal(const Vector& probs, int label, double gamma) {
  check_label(probs, label, "focal");
  if (gamma < 0.0) throw std::invalid_argument("focal: gamma must be >= 0");
  const double f = probs[static_cast<std::size_t>(label)];
  return std::pow(1.0 - f, gamma) * cross_entropy(probs, label);
}

Vector cb_weights(const std::vector<std::int64_t>& counts, double beta) {
  check_counts(counts, "cb_weights");
  if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("cb_weights: beta must lie in [0, 1)");
  const auto num_classes = counts.size();
  Vector w(num_classes);
  double sum = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    // beta = 0 collapses the effective number to 1, so every weight is 1
    w[k] = beta == 0.0 ? 1.0
                       : (1.0 - beta) / (1.0 - std::pow(beta, static_cast<double>(counts[k])));
    sum += w[k];
  }
  const double scale = static_cast<double>(num_classes) / sum;
  for (double& v : w) v *= scale;
  return w;
}

ClassWeights lambda_weights(const std::vector<std::int64_t>& counts, double alpha) {
  check_counts(counts, "lambda_weights");
  if (alpha <= 0.0) throw std::invalid_argument("lambda_weights: alpha must be > 0");
  ClassWeights cw;
  cw.alpha = alpha;
  cw.counts = counts;
  cw.lambda.resize(counts.size());
  double inv_sum = 0.0;
  for (std::int64_t n : counts) inv_sum += 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    cw.lambda[k] = alpha * (1.0 / static_cast<double>(counts[k])) / inv_sum;
  }
  return cw;
}

double ib_factor(const Vector& probs, const Vector& label_one_hot, const Vector& hidden,
                 Norm mode) {
  if (probs.size() != label_one_hot.size()) {
    throw std::invalid_argument("ib_factor: probs has length " + std::to_string(probs.size()) +
                                " but the one-hot label has length " +
                                std::to_string(label_one_hot.size()));
  }
  Vector diff(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) diff[k] = probs[k] - label_one_hot[k];
  return norm(diff, mode) * norm(hidden, mode);
}

WeightedLoss ib_loss(const Vector& probs, int label, const Vector& hidden, double lambda_k,
                     double epsilon) {
  check_label(probs, label, "ib_loss");
  if (lambda_k <= 0.0) throw std::invalid_argument("ib_loss: lambda_k must be > 0");
  if (epsilon <= 0.0) throw std::invalid_argument("ib_loss: epsilon must be > 0");
  const double factor =
      ib_factor(probs, one_hot(label, static_cast<int>(probs.size())), hidden, Norm::L1);
  WeightedLoss out;
  out.weight = lambda_k / (factor + epsilon);
  out.loss = out.weight * cross_entropy(probs, label);
  return out;
}

Vector class_multipliers(const LossSpec& spec, const std::vector<std::int64_t>& counts) {
  validate(spec);
  check_counts(counts, "class_multipliers");
  switch (spec.kind) {
    case LossKind::CE:
    case LossKind::Focal:
      return Vector(counts.size(), 1.0);
    case LossKind::CB:
    case LossKind::IBCB:
      return cb_weights(counts, spec.beta);
    case LossKind::IB:
    case LossKind::IBFocal: {
      const double alpha = spec.alpha > 0.0 ? spec.alpha : static_cast<double>(counts.size());
      return lambda_weights(counts, alpha).lambda;
    }
  }
  throw std::invalid_argument("class_multipliers: unknown loss kind");
}

BatchLoss batch_loss(const LossSpec& spec, const Vector& class_mult,
                     std::span<const BatchSample> batch) {
  validate(spec);
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  BatchLoss out;
  out.sample_weights.resize(batch.size());
  Vector ce(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BatchSample& s = batch[i];
    if (s.trace == nullptr) throw std::invalid_argument("batch_loss: null trace");
    const Vector& probs = s.trace->probs;
    check_label(probs, s.label, "batch_loss");
    if (static_cast<std::size_t>(s.label) >= class_mult.size() &&
        spec.kind != LossKind::CE && spec.kind != LossKind::Focal) {
      throw std::invalid_argument("batch_loss: label " + std::to_string(s.label) +
                                  " outside the class-weight vector");
    }
    ce[i] = cross_entropy(probs, s.label);
    double w = 1.0;
    const double f_true = probs[static_cast<std::size_t>(s.label)];
    switch (spec.kind) {
      case LossKind::CE:
        break;
      case LossKind::Focal:
        w = std::pow(1.0 - f_true, spec.gamma);
        break;
      case LossKind::CB:
        w = class_mult[static_cast<std::size_t>(s.label)];
        break;
      case LossKind::IB:
      case LossKind::IBFocal:
      case LossKind::IBCB: {
        const double factor =
            spec.ib_use_factor
                ? ib_factor(probs, one_hot(s.label, static_cast<int>(probs.size())),
                            s.trace->hidden(), spec.ib_norm)
                : 0.0;
        w = class_mult[static_cast<std::size_t>(s.label)] / (factor + spec.epsilon);
        if (spec.kind == LossKind::IBFocal) w *= std::pow(1.0 - f_true, spec.gamma);
        break;
      }
    }
    out.sample_weights[i] = w;
  }
  if (spec.renormalize_weights) {
    double sum = 0.0;
    for (double w : out.sample_weights) sum += w;
    if (sum > 0.0) {
      const double scale = static_cast<double>(batch.size()) / sum;
      for (double& w : out.sample_weights) w *= scale;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) total += out.sample_weights[i] * ce[i];
  out.mean_loss = total / static_cast<double>(batch.size());
  return out;
}

}  // namespace ib

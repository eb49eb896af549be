#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ib/data.hpp"
#include "ib/losses.hpp"
#include "ib/model.hpp"

namespace ib {

struct DecayPoint {
  int epoch = 0;      // 0-based epoch from which the factor applies
  double factor = 1.0;
};

struct TrainConfig {
  int total_epochs = 0;       // T
  int transition_epoch = 0;   // T1: epochs before it train phase1_loss
  int batch_size = 128;
  double base_lr = 0.1;
  int warmup_epochs = 0;      // linear ramp (epoch+1)/warmup over the first epochs
  std::vector<DecayPoint> decay_points;
  double momentum = 0.0;
  double weight_decay = 0.0;
  LossSpec phase1_loss;
  LossSpec phase2_loss;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;           // 1-based
  bool fine_tune = false;  // phase tag: false = normal, true = fine-tune
  double lr = 0.0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  bool has_weight_stats = false;  // set when the active loss is an IB kind
  double weight_mean = 0.0;
  double weight_min = 0.0;
  double weight_max = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
};

// Tab-separated, one epoch per row:
// epoch, phase, lr, mean_loss, train_accuracy, weight_mean, weight_min,
// weight_max ("-" when no weight stats were recorded).
void save_history(const RunHistory& history, const std::string& path);

// Warmup ramp base_lr * (epoch+1)/warmup_epochs, then base_lr times the
// product of every decay factor whose epoch <= the current one.
double lr_at(const TrainConfig& config, int epoch);

// v <- momentum * v + (g + weight_decay * p); p <- p - lr * v.
// Velocity shapes must match the parameters.
void sgd_step(MLPParams& params, const Grads& grads, Grads& velocity, double lr, double momentum,
              double weight_decay);

// Seeded permutation of [0, n), chunked; the final partial batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, int epoch);

struct TrainResult {
  MLPParams model;
  RunHistory history;
};

// Two-phase mini-batch SGD: epochs below transition_epoch minimize
// phase1_loss, the rest minimize phase2_loss. Class weights for each phase
// are resolved once from the training counts; optimizer velocity carries
// across the transition unchanged.
TrainResult train(MLPParams model, const Dataset& train_ds, const TrainConfig& config);

}  // namespace ib

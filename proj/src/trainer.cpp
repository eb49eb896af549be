#include "ib/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ib/io.hpp"

namespace ib {

void validate(const TrainConfig& config) {
  if (config.total_epochs < 0) throw std::invalid_argument("train: total_epochs must be >= 0");
  if (config.transition_epoch < 0 || config.transition_epoch > config.total_epochs) {
    throw std::invalid_argument("train: transition_epoch must lie in [0, total_epochs]");
  }
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.base_lr > 0.0)) throw std::invalid_argument("train: base_lr must be > 0");
  if (config.warmup_epochs < 0) throw std::invalid_argument("train: warmup_epochs must be >= 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0) {
    throw std::invalid_argument("train: momentum must lie in [0, 1)");
  }
  if (config.weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be >= 0");
  int prev = -1;
  for (const DecayPoint& dp : config.decay_points) {
    if (dp.epoch <= prev) {
      throw std::invalid_argument("train: decay_points must be strictly increasing in epoch");
    }
    if (!(dp.factor > 0.0)) throw std::invalid_argument("train: decay factors must be > 0");
    prev = dp.epoch;
  }
  validate(config.phase1_loss);
  validate(config.phase2_loss);
}

void save_history(const RunHistory& history, const std::string& path) {
  std::string out =
      "epoch\tphase\tlr\tmean_loss\ttrain_accuracy\tweight_mean\tweight_min\tweight_max\n";
  for (const EpochRecord& r : history.epochs) {
    out += std::to_string(r.epoch);
    out += '\t';
    out += r.fine_tune ? "fine-tune" : "normal";
    out += '\t';
    out += format_double(r.lr);
    out += '\t';
    out += format_double(r.mean_loss);
    out += '\t';
    out += format_double(r.train_accuracy);
    if (r.has_weight_stats) {
      out += '\t';
      out += format_double(r.weight_mean);
      out += '\t';
      out += format_double(r.weight_min);
      out += '\t';
      out += format_double(r.weight_max);
    } else {
      out += "\t-\t-\t-";
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

double lr_at(const TrainConfig& config, int epoch) {
  if (epoch < 0 || epoch >= config.total_epochs) {
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " out of range [0, " +
                                std::to_string(config.total_epochs) + ")");
  }
  if (epoch < config.warmup_epochs) {
    return config.base_lr * static_cast<double>(epoch + 1) /
           static_cast<double>(config.warmup_epochs);
  }
  double lr = config.base_lr;
  for (const DecayPoint& dp : config.decay_points) {
    if (dp.epoch <= epoch) lr *= dp.factor;
  }
  return lr;
}

void sgd_step(MLPParams& params, const Grads& grads, Grads& velocity, double lr, double momentum,
              double weight_decay) {
  if (grads.weights.size() != params.num_layers() || velocity.weights.size() != params.num_layers()) {
    throw std::invalid_argument("sgd_step: layer count mismatch");
  }
  for (std::size_t i = 0; i < params.num_layers(); ++i) {
    auto& w = params.weights[i].data();
    const auto& gw = grads.weights[i].data();
    auto& vw = velocity.weights[i].data();
    auto& b = params.biases[i];
    const auto& gb = grads.biases[i];
    auto& vb = velocity.biases[i];
    if (w.size() != gw.size() || w.size() != vw.size() || b.size() != gb.size() ||
        b.size() != vb.size()) {
      throw std::invalid_argument("sgd_step: shape mismatch at layer " + std::to_string(i));
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      vw[j] = momentum * vw[j] + (gw[j] + weight_decay * w[j]);
      w[j] -= lr * vw[j];
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
      vb[j] = momentum * vb[j] + (gb[j] + weight_decay * b[j]);
      b[j] -= lr * vb[j];
    }
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, int epoch) {
  if (n < 1) throw std::invalid_argument("make_batches: n must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  Rng rng = Rng(seed).split(static_cast<std::uint64_t>(epoch));
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

TrainResult train(MLPParams model, const Dataset& train_ds, const TrainConfig& config) {
  validate(config);
  validate(train_ds);
  if (model.num_classes() != train_ds.num_classes()) {
    throw std::invalid_argument("train: model emits " + std::to_string(model.num_classes()) +
                                " classes but the dataset has " +
                                std::to_string(train_ds.num_classes()));
  }
  if (model.input_dim() != train_ds.dim()) {
    throw std::invalid_argument("train: model expects " + std::to_string(model.input_dim()) +
                                " features but the dataset has " + std::to_string(train_ds.dim()));
  }

  const std::size_t n = train_ds.size();
  const Vector phase1_mult = class_multipliers(config.phase1_loss, train_ds.class_counts);
  Vector phase2_mult;  // resolved once, at the fine-tuning transition

  Grads velocity = zeros_like(model);
  RunHistory history;
  history.epochs.reserve(static_cast<std::size_t>(config.total_epochs));

  for (int epoch = 0; epoch < config.total_epochs; ++epoch) {
    const bool fine_tune = epoch >= config.transition_epoch;
    const LossSpec& spec = fine_tune ? config.phase2_loss : config.phase1_loss;
    if (fine_tune && phase2_mult.empty()) {
      phase2_mult = class_multipliers(config.phase2_loss, train_ds.class_counts);
    }
    const Vector& mult = fine_tune ? phase2_mult : phase1_mult;
    const double lr = lr_at(config, epoch);

    double loss_sum = 0.0;
    const bool track_weights = uses_ib_factor(spec.kind);
    double w_min = 0.0, w_max = 0.0, w_sum = 0.0;
    bool any_weight = false;

    for (const auto& batch : make_batches(n, static_cast<std::size_t>(config.batch_size),
                                          config.seed, epoch)) {
      std::vector<ForwardTrace> traces;
      traces.reserve(batch.size());
      std::vector<BatchSample> samples;
      samples.reserve(batch.size());
      for (std::size_t idx : batch) {
        traces.push_back(forward(model, train_ds.features.row(idx)));
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        samples.push_back({&traces[i], train_ds.labels[batch[i]]});
      }
      const BatchLoss bl = batch_loss(spec, mult, samples);
      loss_sum += bl.mean_loss * static_cast<double>(batch.size());
      if (track_weights) {
        for (double w : bl.sample_weights) {
          if (!any_weight) {
            w_min = w_max = w;
            any_weight = true;
          } else {
            w_min = std::min(w_min, w);
            w_max = std::max(w_max, w);
          }
          w_sum += w;
        }
      }

      // Mean gradient of the weighted batch loss, summed in sample order.
      Grads acc = zeros_like(model);
      const double inv_batch = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        backward_into(model, traces[i], train_ds.labels[batch[i]],
                      bl.sample_weights[i] * inv_batch, acc);
      }
      sgd_step(model, acc, velocity, lr, config.momentum, config.weight_decay);
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (predict(model, train_ds.features.row(i)) == train_ds.labels[i]) ++correct;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.fine_tune = fine_tune;
    rec.lr = lr;
    rec.mean_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (track_weights && any_weight) {
      rec.has_weight_stats = true;
      rec.weight_mean = w_sum / static_cast<double>(n);
      rec.weight_min = w_min;
      rec.weight_max = w_max;
    }
    history.epochs.push_back(rec);
  }

  return {std::move(model), std::move(history)};
}

}  // namespace ib

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ib/numerics.hpp"

namespace ib {

// Fully connected classifier. Hidden layers use ReLU, the final layer is
// affine; weights[i] has shape layer_sizes[i+1] x layer_sizes[i]. There is
// no batch norm or dropout, so the feature vector feeding the final layer
// is unambiguous and gradients are exactly checkable.
struct MLPParams {
  std::vector<int> layer_sizes;  // [d_in, d_1, ..., K]
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int input_dim() const { return layer_sizes.front(); }
  int num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
};

// Per-sample forward record. hidden() is the activation actually fed to the
// final layer: the last post-ReLU activation, or the raw input for a
// single-layer model.
struct ForwardTrace {
  Vector input;
  std::vector<Vector> pre_activations;  // hidden layers only
  std::vector<Vector> activations;      // hidden layers only, post-ReLU
  Vector logits;
  Vector probs;

  const Vector& hidden() const { return activations.empty() ? input : activations.back(); }
};

// Parameter-shaped gradient (or optimizer-state) container.
struct Grads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

Grads zeros_like(const MLPParams& model);
void add(Grads& acc, const Grads& g);

// He-normal initialization: weights ~ N(0, 2/fan_in), biases zero,
// deterministic in the seed.
MLPParams init_model(const std::vector<int>& layer_sizes, std::uint64_t seed);

ForwardTrace forward(const MLPParams& model, const Vector& x);

// Gradients of sample_weight * cross_entropy(probs, label) with respect to
// every parameter. The final-layer weight gradient is exactly
// sample_weight * (f - y) h^T. Adds into acc.
void backward_into(const MLPParams& model, const ForwardTrace& trace, int label,
                   double sample_weight, Grads& acc);
Grads backward(const MLPParams& model, const ForwardTrace& trace, int label,
               double sample_weight);

// L1 norm of the flattened final-layer weight gradient (f - y) h^T, the
// per-sample influence proxy. Bias gradients are excluded.
double last_layer_grad_l1(const ForwardTrace& trace, int label);

// Argmax over logits; ties resolve to the smallest class index so
// class-wise accuracy is deterministic.
int predict(const MLPParams& model, const Vector& x);

// Flat binary checkpoint: magic "IBCKPT01", u32 size count, u32 sizes, then
// per layer the row-major weight doubles followed by the bias doubles.
// Little-endian; round-trips bit-exactly.
void save_checkpoint(const MLPParams& model, const std::string& path);
MLPParams load_checkpoint(const std::string& path);

}  // namespace ib

#include "ib/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "ib/io.hpp"

namespace ib {

namespace {

constexpr char kCheckpointMagic[8] = {'I', 'B', 'C', 'K', 'P', 'T', '0', '1'};

void check_sizes(const std::vector<int>& layer_sizes) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("model: need at least an input and an output layer, got " +
                                std::to_string(layer_sizes.size()) + " sizes");
  }
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] < 1) {
      throw std::invalid_argument("model: layer size " + std::to_string(layer_sizes[i]) +
                                  " at position " + std::to_string(i) + " must be >= 1");
    }
  }
}

void check_trace(const MLPParams& model, const ForwardTrace& trace) {
  const std::size_t hidden_layers = model.num_layers() - 1;
  bool ok = trace.input.size() == static_cast<std::size_t>(model.input_dim()) &&
            trace.probs.size() == static_cast<std::size_t>(model.num_classes()) &&
            trace.logits.size() == trace.probs.size() &&
            trace.pre_activations.size() == hidden_layers &&
            trace.activations.size() == hidden_layers;
  for (std::size_t i = 0; ok && i < hidden_layers; ++i) {
    const auto width = static_cast<std::size_t>(model.layer_sizes[i + 1]);
    ok = trace.pre_activations[i].size() == width && trace.activations[i].size() == width;
  }
  if (!ok) throw std::invalid_argument("backward: trace does not match the model's shape");
}

}  // namespace

Grads zeros_like(const MLPParams& model) {
  Grads g;
  g.weights.reserve(model.num_layers());
  g.biases.reserve(model.num_layers());
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    g.weights.emplace_back(model.weights[i].rows(), model.weights[i].cols());
    g.biases.emplace_back(model.biases[i].size(), 0.0);
  }
  return g;
}

void add(Grads& acc, const Grads& g) {
  if (acc.weights.size() != g.weights.size()) {
    throw std::invalid_argument("Grads::add: layer count mismatch");
  }
  for (std::size_t i = 0; i < acc.weights.size(); ++i) {
    auto& aw = acc.weights[i].data();
    const auto& gw = g.weights[i].data();
    if (aw.size() != gw.size() || acc.biases[i].size() != g.biases[i].size()) {
      throw std::invalid_argument("Grads::add: shape mismatch at layer " + std::to_string(i));
    }
    for (std::size_t j = 0; j < aw.size(); ++j) aw[j] += gw[j];
    for (std::size_t j = 0; j < acc.biases[i].size(); ++j) acc.biases[i][j] += g.biases[i][j];
  }
}

MLPParams init_model(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  check_sizes(layer_sizes);
  MLPParams model;
  model.layer_sizes = layer_sizes;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const auto fan_in = static_cast<std::size_t>(layer_sizes[i]);
    const auto fan_out = static_cast<std::size_t>(layer_sizes[i + 1]);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data()) v = stddev * rng.normal();
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

ForwardTrace forward(const MLPParams& model, const Vector& x) {
  if (x.size() != static_cast<std::size_t>(model.input_dim())) {
    throw std::invalid_argument("forward: input has length " + std::to_string(x.size()) +
                                " but the model expects " + std::to_string(model.input_dim()));
  }
  ForwardTrace trace;
  trace.input = x;
  const Vector* act = &trace.input;
  const std::size_t layers = model.num_layers();
  for (std::size_t i = 0; i + 1 < layers; ++i) {
    Vector pre = matvec(model.weights[i], *act);
    for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += model.biases[i][j];
    Vector post(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j) post[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    trace.pre_activations.push_back(std::move(pre));
    trace.activations.push_back(std::move(post));
    act = &trace.activations.back();
  }
  trace.logits = matvec(model.weights[layers - 1], *act);
  for (std::size_t j = 0; j < trace.logits.size(); ++j) trace.logits[j] += model.biases[layers - 1][j];
  trace.probs = stable_softmax(trace.logits);
  return trace;
}

void backward_into(const MLPParams& model, const ForwardTrace& trace, int label,
                   double sample_weight, Grads& acc) {
  check_trace(model, trace);
  if (label < 0 || label >= model.num_classes()) {
    throw std::invalid_argument("backward: label " + std::to_string(label) + " out of range");
  }
  if (sample_weight < 0.0) {
    throw std::invalid_argument("backward: sample_weight must be >= 0");
  }
  const std::size_t layers = model.num_layers();
  Vector delta(trace.probs.size());
  for (std::size_t k = 0; k < delta.size(); ++k) {
    delta[k] = sample_weight * (trace.probs[k] - (static_cast<int>(k) == label ? 1.0 : 0.0));
  }
  for (std::size_t i = layers; i-- > 0;) {
    const Vector& below = (i == 0) ? trace.input : trace.activations[i - 1];
    Matrix& gw = acc.weights[i];
    for (std::size_t r = 0; r < gw.rows(); ++r) {
      const double d = delta[r];
      for (std::size_t c = 0; c < gw.cols(); ++c) gw(r, c) += d * below[c];
    }
    for (std::size_t r = 0; r < delta.size(); ++r) acc.biases[i][r] += delta[r];
    if (i > 0) {
      Vector next(below.size(), 0.0);
      const Matrix& w = model.weights[i];
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const double d = delta[r];
        for (std::size_t c = 0; c < w.cols(); ++c) next[c] += w(r, c) * d;
      }
      // ReLU gate; the subgradient at exactly zero is taken as zero
      const Vector& pre = trace.pre_activations[i - 1];
      for (std::size_t c = 0; c < next.size(); ++c) {
        if (pre[c] <= 0.0) next[c] = 0.0;
      }
      delta = std::move(next);
    }
  }
}

Grads backward(const MLPParams& model, const ForwardTrace& trace, int label,
               double sample_weight) {
  Grads g = zeros_like(model);
  backward_into(model, trace, label, sample_weight, g);
  return g;
}

double last_layer_grad_l1(const ForwardTrace& trace, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= trace.probs.size()) {
    throw std::invalid_argument("last_layer_grad_l1: label " + std::to_string(label) +
                                " out of range");
  }
  const Vector& h = trace.hidden();
  double total = 0.0;
  for (std::size_t k = 0; k < trace.probs.size(); ++k) {
    const double d = trace.probs[k] - (static_cast<int>(k) == label ? 1.0 : 0.0);
    for (double hl : h) total += std::abs(d * hl);
  }
  return total;
}

int predict(const MLPParams& model, const Vector& x) {
  const ForwardTrace trace = forward(model, x);
  int best = 0;
  for (std::size_t k = 1; k < trace.logits.size(); ++k) {
    if (trace.logits[k] > trace.logits[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(k);
    }
  }
  return best;
}

void save_checkpoint(const MLPParams& model, const std::string& path) {
  check_sizes(model.layer_sizes);
  std::string buf;
  buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  auto put_u32 = [&buf](std::uint32_t v) {
    char bytes[4];
    std::memcpy(bytes, &v, 4);
    buf.append(bytes, 4);
  };
  auto put_doubles = [&buf](const Vector& v) {
    buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  };
  put_u32(static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (int s : model.layer_sizes) put_u32(static_cast<std::uint32_t>(s));
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    put_doubles(model.weights[i].data());
    put_doubles(model.biases[i]);
  }
  write_file_atomic(path, buf);
}

MLPParams load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated: " + path);
  };
  need(sizeof(kCheckpointMagic));
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw std::runtime_error("not a model checkpoint: " + path);
  }
  pos += sizeof(kCheckpointMagic);
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  const std::uint32_t n_sizes = get_u32();
  if (n_sizes < 2 || n_sizes > 1024) {
    throw std::runtime_error("checkpoint has implausible layer count: " + path);
  }
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) {
    const std::uint32_t v = get_u32();
    if (v < 1 || v > (1u << 24)) throw std::runtime_error("checkpoint has invalid layer size: " + path);
    s = static_cast<int>(v);
  }
  MLPParams model;
  model.layer_sizes = sizes;
  auto get_doubles = [&](std::size_t count) {
    need(count * sizeof(double));
    Vector v(count);
    std::memcpy(v.data(), buf.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    return v;
  };
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto rows = static_cast<std::size_t>(sizes[i + 1]);
    const auto cols = static_cast<std::size_t>(sizes[i]);
    Matrix w(rows, cols);
    w.data() = get_doubles(rows * cols);
    if (!all_finite(w)) throw std::runtime_error("checkpoint contains non-finite weights: " + path);
    model.weights.push_back(std::move(w));
    Vector b = get_doubles(rows);
    if (!all_finite(b)) throw std::runtime_error("checkpoint contains non-finite biases: " + path);
    model.biases.push_back(std::move(b));
  }
  if (pos != buf.size()) throw std::runtime_error("checkpoint has trailing bytes: " + path);
  return model;
}

}  // namespace ib

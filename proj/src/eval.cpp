#include "ib/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ib/losses.hpp"

namespace ib {

namespace {

// In-place Cholesky solve of the symmetric positive definite system A x = b.
// Reports near-zero pivots instead of dividing through them.
class CholeskySolver {
 public:
  explicit CholeskySolver(Matrix a) : l_(std::move(a)) {
    const std::size_t n = l_.rows();
    if (n != l_.cols()) throw std::invalid_argument("cholesky: matrix must be square");
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(l_(i, i)));
    const double pivot_floor = std::max(1e-12 * max_diag, 1e-300);
    for (std::size_t j = 0; j < n; ++j) {
      double d = l_(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > pivot_floor)) {
        throw std::runtime_error(
            "cholesky: matrix is singular or not positive definite (pivot " +
            std::to_string(d) + " at row " + std::to_string(j) + "); retry with damping");
      }
      l_(j, j) = std::sqrt(d);
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = l_(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / l_(j, j);
      }
    }
  }

  Vector solve(const Vector& b) const {
    const std::size_t n = l_.rows();
    if (b.size() != n) throw std::invalid_argument("cholesky: rhs length mismatch");
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
      y[i] = s / l_(i, i);
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * x[k];
      x[i] = s / l_(i, i);
    }
    return x;
  }

 private:
  Matrix l_;
};

// Adds scale * (diag(f) - f f^T) (x) h h^T into the P x P Hessian, with the
// final-layer weights flattened row-major (class-major).
void add_softmax_ce_hessian(Matrix& hessian, const Vector& f, const Vector& h, double scale) {
  const std::size_t num_classes = f.size();
  const std::size_t width = h.size();
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t k2 = 0; k2 < num_classes; ++k2) {
      const double a = scale * (f[k] * ((k == k2 ? 1.0 : 0.0) - f[k2]));
      if (a == 0.0) continue;
      for (std::size_t l = 0; l < width; ++l) {
        const double ah = a * h[l];
        for (std::size_t l2 = 0; l2 < width; ++l2) {
          hessian(k * width + l, k2 * width + l2) += ah * h[l2];
        }
      }
    }
  }
}

struct ConvexEval {
  double risk = 0.0;
  Matrix grad;  // K x d mean gradient
};

ConvexEval convex_eval(const Dataset& ds, const Matrix& weights, int exclude_index) {
  const auto num_classes = static_cast<std::size_t>(ds.num_classes());
  ConvexEval out;
  out.grad = Matrix(num_classes, static_cast<std::size_t>(ds.dim()));
  std::size_t used = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (static_cast<int>(i) == exclude_index) continue;
    ++used;
    const Vector x = ds.features.row(i);
    const Vector f = stable_softmax(matvec(weights, x));
    out.risk += cross_entropy(f, ds.labels[i]);
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double d = f[k] - (static_cast<int>(k) == ds.labels[i] ? 1.0 : 0.0);
      for (std::size_t c = 0; c < x.size(); ++c) out.grad(k, c) += d * x[c];
    }
  }
  if (used == 0) throw std::invalid_argument("convex fit: no samples left");
  out.risk /= static_cast<double>(used);
  for (double& g : out.grad.data()) g /= static_cast<double>(used);
  return out;
}

}  // namespace

Metrics evaluate(const MLPParams& model, const Dataset& test, int k_for_topk) {
  validate(test);
  const int num_classes = model.num_classes();
  if (k_for_topk < 1 || k_for_topk > num_classes) {
    throw std::invalid_argument("evaluate: k must lie in [1, " + std::to_string(num_classes) + "]");
  }
  if (test.num_classes() > num_classes) {
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(test.num_classes()) +
                                " classes but the model emits " + std::to_string(num_classes));
  }
  if (test.dim() != model.input_dim()) {
    throw std::invalid_argument("evaluate: feature width mismatch");
  }

  Metrics m;
  m.k = k_for_topk;
  m.confusion = Matrix(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(num_classes));
  std::size_t topk_hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const ForwardTrace trace = forward(model, test.features.row(i));
    const int label = test.labels[i];
    int best = 0;
    for (std::size_t k = 1; k < trace.logits.size(); ++k) {
      if (trace.logits[k] > trace.logits[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    }
    m.confusion(static_cast<std::size_t>(label), static_cast<std::size_t>(best)) += 1.0;
    // rank under (logit desc, index asc), matching the predict tie rule
    const double own = trace.logits[static_cast<std::size_t>(label)];
    int rank = 0;
    for (std::size_t k = 0; k < trace.logits.size(); ++k) {
      if (trace.logits[k] > own ||
          (trace.logits[k] == own && k < static_cast<std::size_t>(label))) {
        ++rank;
      }
    }
    if (rank < k_for_topk) ++topk_hits;
  }

  m.per_class.resize(static_cast<std::size_t>(num_classes), 0.0);
  double diag = 0.0;
  for (std::size_t r = 0; r < m.confusion.rows(); ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < m.confusion.cols(); ++c) row_sum += m.confusion(r, c);
    m.per_class[r] = row_sum > 0.0 ? m.confusion(r, r) / row_sum : 0.0;
    diag += m.confusion(r, r);
  }
  m.overall = diag / static_cast<double>(test.size());
  m.top_k = static_cast<double>(topk_hits) / static_cast<double>(test.size());
  return m;
}

InfluenceReport influence_report(const MLPParams& model, const Dataset& ds, std::size_t top_m) {
  validate(ds);
  if (ds.num_classes() > model.num_classes() || ds.dim() != model.input_dim()) {
    throw std::invalid_argument("influence_report: dataset does not match the model");
  }
  const auto min_count = *std::min_element(ds.class_counts.begin(), ds.class_counts.end());
  if (top_m < 1 || static_cast<std::int64_t>(top_m) > min_count) {
    throw std::invalid_argument("influence_report: top_m must lie in [1, " +
                                std::to_string(min_count) + "] (the smallest class count)");
  }

  InfluenceReport rep;
  rep.raw.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ForwardTrace trace = forward(model, ds.features.row(i));
    rep.raw[i] = ib_factor(trace.probs, one_hot(ds.labels[i], model.num_classes()),
                           trace.hidden(), Norm::L1);
  }

  const auto [lo_it, hi_it] = std::minmax_element(rep.raw.begin(), rep.raw.end());
  const double lo = *lo_it, hi = *hi_it;
  rep.normalized.resize(ds.size());
  if (hi > lo) {
    for (std::size_t i = 0; i < ds.size(); ++i) rep.normalized[i] = (rep.raw[i] - lo) / (hi - lo);
  }  // degenerate scaling maps everything to 0

  const auto num_classes = static_cast<std::size_t>(ds.num_classes());
  rep.top_per_class.resize(num_classes);
  rep.class_mean_normalized.assign(num_classes, 0.0);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto members = by_class[k];
    double sum = 0.0;
    for (std::size_t i : members) sum += rep.normalized[i];
    rep.class_mean_normalized[k] =
        members.empty() ? 0.0 : sum / static_cast<double>(members.size());
    std::sort(members.begin(), members.end(), [&rep](std::size_t a, std::size_t b) {
      if (rep.raw[a] != rep.raw[b]) return rep.raw[a] > rep.raw[b];
      return a < b;
    });
    members.resize(std::min(members.size(), top_m));
    rep.top_per_class[k] = std::move(members);
  }
  return rep;
}

ExactInfluence exact_influence(const MLPParams& model, const Dataset& ds, double damping) {
  validate(ds);
  if (damping < 0.0) throw std::invalid_argument("exact_influence: damping must be >= 0");
  if (ds.num_classes() > model.num_classes() || ds.dim() != model.input_dim()) {
    throw std::invalid_argument("exact_influence: dataset does not match the model");
  }
  const auto num_classes = static_cast<std::size_t>(model.num_classes());
  const auto width = static_cast<std::size_t>(model.layer_sizes[model.layer_sizes.size() - 2]);
  const std::size_t params = num_classes * width;
  if (params > 500) {
    throw std::invalid_argument("exact_influence: final layer has " + std::to_string(params) +
                                " weights; the dense Hessian is capped at 500");
  }

  ExactInfluence out;
  out.damping = damping;
  out.hessian = Matrix(params, params);
  std::vector<ForwardTrace> traces;
  traces.reserve(ds.size());
  const double inv_n = 1.0 / static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    traces.push_back(forward(model, ds.features.row(i)));
    add_softmax_ce_hessian(out.hessian, traces.back().probs, traces.back().hidden(), inv_n);
  }

  Matrix damped = out.hessian;
  for (std::size_t p = 0; p < params; ++p) damped(p, p) += damping;
  const CholeskySolver solver(std::move(damped));

  out.influence.reserve(ds.size());
  out.l1_norms.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Vector& f = traces[i].probs;
    const Vector& h = traces[i].hidden();
    Vector grad(params, 0.0);
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double d = f[k] - (static_cast<int>(k) == ds.labels[i] ? 1.0 : 0.0);
      for (std::size_t l = 0; l < width; ++l) grad[k * width + l] = d * h[l];
    }
    Vector infl = solver.solve(grad);
    for (double& v : infl) v = -v;
    out.l1_norms[i] = norm(infl, Norm::L1);
    out.influence.push_back(std::move(infl));
  }
  return out;
}

Matrix fit_linear_softmax(const Dataset& ds, int exclude_index, const ConvexFitOptions& options) {
  validate(ds);
  if (exclude_index < -1 || exclude_index >= static_cast<int>(ds.size())) {
    throw std::invalid_argument("fit_linear_softmax: exclude_index out of range");
  }
  const auto num_classes = static_cast<std::size_t>(ds.num_classes());
  const auto dim = static_cast<std::size_t>(ds.dim());
  const std::size_t params = num_classes * dim;

  Matrix weights(num_classes, dim);
  ConvexEval cur = convex_eval(ds, weights, exclude_index);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    if (norm(cur.grad.data(), Norm::L2) < options.grad_tol) return weights;

    Matrix hessian(params, params);
    const double inv_n =
        1.0 / static_cast<double>(ds.size() - (exclude_index >= 0 ? 1 : 0));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (static_cast<int>(i) == exclude_index) continue;
      const Vector x = ds.features.row(i);
      const Vector f = stable_softmax(matvec(weights, x));
      add_softmax_ce_hessian(hessian, f, x, inv_n);
    }
    for (std::size_t p = 0; p < params; ++p) hessian(p, p) += options.damping;
    const Vector step = CholeskySolver(std::move(hessian)).solve(cur.grad.data());

    double descent = 0.0;
    for (std::size_t p = 0; p < params; ++p) descent += cur.grad.data()[p] * step[p];

    double t = 1.0;
    for (;;) {
      Matrix trial = weights;
      for (std::size_t p = 0; p < params; ++p) trial.data()[p] -= t * step[p];
      ConvexEval next = convex_eval(ds, trial, exclude_index);
      if (next.risk <= cur.risk - 1e-4 * t * descent || t < 1e-12) {
        weights = std::move(trial);
        cur = std::move(next);
        break;
      }
      t *= 0.5;
    }
  }
  if (norm(cur.grad.data(), Norm::L2) < options.grad_tol) return weights;
  throw std::runtime_error("fit_linear_softmax: no convergence within " +
                           std::to_string(options.max_iters) + " iterations (gradient norm " +
                           std::to_string(norm(cur.grad.data(), Norm::L2)) + ")");
}

double leave_one_out(const Dataset& ds, std::size_t i, const Matrix& w_full,
                     const ConvexFitOptions& options) {
  if (ds.size() > 200) {
    throw std::invalid_argument("leave_one_out: capped at 200 samples, got " +
                                std::to_string(ds.size()));
  }
  if (i >= ds.size()) {
    throw std::invalid_argument("leave_one_out: sample index " + std::to_string(i) +
                                " out of range [0, " + std::to_string(ds.size()) + ")");
  }
  const Matrix w_without = fit_linear_softmax(ds, static_cast<int>(i), options);
  double change = 0.0;
  for (std::size_t p = 0; p < w_full.size(); ++p) {
    change += std::abs(w_without.data()[p] - w_full.data()[p]);
  }
  return change;
}

double leave_one_out(const Dataset& ds, std::size_t i, const ConvexFitOptions& options) {
  return leave_one_out(ds, i, fit_linear_softmax(ds, -1, options), options);
}

namespace {

Vector average_ranks(const Vector& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vector ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i + j - 1)) / 2.0 + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

}  // namespace

double spearman_rank_corr(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  if (a.size() < 3) throw std::invalid_argument("spearman: need at least 3 points");
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw std::invalid_argument("spearman: rank correlation undefined for constant input");
  }
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace ib

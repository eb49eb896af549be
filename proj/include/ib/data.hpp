#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ib/numerics.hpp"

namespace ib {

struct Dataset {
  Matrix features;  // n x d
  std::vector<int> labels;
  std::vector<std::int64_t> class_counts;
  std::string name;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  int num_classes() const { return static_cast<int>(class_counts.size()); }
};

// Rejects label/count inconsistencies and non-finite features.
void validate(const Dataset& ds);

struct GaussianMixtureSpec {
  std::vector<Vector> means;  // one center per class, equal dimensions
  double cov_scale = 1.0;     // isotropic standard deviation, >= 0
  int n_per_class = 1;
  std::uint64_t seed = 0;
};

Dataset make_gaussian_mixture(const GaussianMixtureSpec& spec);

struct ImbalanceSpec {
  enum class Kind { None, LongTailed, Step };
  Kind kind = Kind::None;
  double rho = 1.0;  // max count / min count, > 1 for the transforms
  int minority_classes = 1;
  std::uint64_t seed = 0;
};

Dataset apply_imbalance(const Dataset& ds, const ImbalanceSpec& spec);

// Geometric decay: class k keeps round(n_max * mu^k) samples with
// mu = rho^(-1/(K-1)) and n_max the class-0 count, so the last class keeps
// n_max / rho. Any class rounding to zero is rejected rather than clamped.
Dataset apply_long_tail(const Dataset& ds, double rho, std::uint64_t seed);

// Two groups: the first K - minority_classes classes keep n_max each, the
// rest keep round(n_max / rho) each.
Dataset apply_step(const Dataset& ds, double rho, int minority_classes, std::uint64_t seed);

// max_k n_k / min_k n_k.
double imbalance_ratio(const Dataset& ds);

// CSV with header "f0,...,f{d-1},label"; features round-trip at 17
// significant digits, labels exactly. Malformed rows are rejected with
// their line number; the label set must be contiguous from zero.
Dataset load_csv(const std::string& path);

// Writes the CSV plus a "<path>.meta" sidecar carrying counts, the
// imbalance ratio and any extra key/value pairs (generating spec, seed).
void save_csv(const Dataset& ds, const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& extra_meta = {});

// Balanced test split mirroring evaluation on an unskewed test set: every
// class contributes min_k floor(count_k * test_fraction) samples to the
// test side, the remainder is train.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

}  // namespace ib

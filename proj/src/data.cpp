#include "ib/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "ib/io.hpp"

namespace ib {

namespace {

std::vector<std::int64_t> counts_from_labels(const std::vector<int>& labels, int num_classes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("dataset: label " + std::to_string(y) + " out of range [0, " +
                                  std::to_string(num_classes) + ")");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

// Indices of each class in original order.
std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  return by_class;
}

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.name = ds.name;
  out.features = Matrix(rows.size(), static_cast<std::size_t>(ds.dim()));
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < out.features.cols(); ++c) {
      out.features(i, c) = ds.features(rows[i], c);
    }
    out.labels.push_back(ds.labels[rows[i]]);
  }
  out.class_counts = counts_from_labels(out.labels, ds.num_classes());
  return out;
}

// Keeps targets[k] samples of every class, chosen by a seeded per-class
// permutation without replacement; survivors stay in original order.
Dataset subsample_by_class(const Dataset& ds, const std::vector<std::int64_t>& targets,
                           std::uint64_t seed) {
  const auto by_class = indices_by_class(ds);
  Rng root(seed);
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    const auto& members = by_class[k];
    const auto want = static_cast<std::size_t>(targets[k]);
    if (want > members.size()) {
      throw std::invalid_argument("subsample: class " + std::to_string(k) + " has only " +
                                  std::to_string(members.size()) + " samples, need " +
                                  std::to_string(want));
    }
    Rng rng = root.split(k);
    const auto perm = rng.permutation(members.size());
    for (std::size_t i = 0; i < want; ++i) kept.push_back(members[perm[i]]);
  }
  std::sort(kept.begin(), kept.end());
  return take_rows(ds, kept);
}

}  // namespace

void validate(const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("dataset: empty");
  if (ds.features.rows() != ds.size()) {
    throw std::invalid_argument("dataset: feature rows (" + std::to_string(ds.features.rows()) +
                                ") do not match label count (" + std::to_string(ds.size()) + ")");
  }
  if (!all_finite(ds.features)) throw std::invalid_argument("dataset: non-finite feature value");
  const auto counts = counts_from_labels(ds.labels, ds.num_classes());
  if (counts != ds.class_counts) {
    throw std::invalid_argument("dataset: class_counts do not match the labels");
  }
}

Dataset make_gaussian_mixture(const GaussianMixtureSpec& spec) {
  if (spec.means.empty()) throw std::invalid_argument("gaussian mixture: need at least one mean");
  const std::size_t dim = spec.means.front().size();
  if (dim == 0) throw std::invalid_argument("gaussian mixture: means must be non-empty points");
  for (std::size_t k = 0; k < spec.means.size(); ++k) {
    if (spec.means[k].size() != dim) {
      throw std::invalid_argument("gaussian mixture: mean " + std::to_string(k) +
                                  " has dimension " + std::to_string(spec.means[k].size()) +
                                  ", expected " + std::to_string(dim));
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (spec.means[j] == spec.means[k]) {
        throw std::invalid_argument("gaussian mixture: means " + std::to_string(j) + " and " +
                                    std::to_string(k) + " coincide");
      }
    }
  }
  if (spec.n_per_class < 1) throw std::invalid_argument("gaussian mixture: n_per_class must be >= 1");
  if (spec.cov_scale < 0.0) throw std::invalid_argument("gaussian mixture: cov_scale must be >= 0");

  const std::size_t num_classes = spec.means.size();
  const auto per_class = static_cast<std::size_t>(spec.n_per_class);
  Dataset ds;
  ds.name = "gaussian_mixture";
  ds.features = Matrix(num_classes * per_class, dim);
  ds.labels.reserve(num_classes * per_class);
  Rng rng(spec.seed);
  std::size_t row = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (std::size_t c = 0; c < dim; ++c) {
        ds.features(row, c) = spec.means[k][c] + spec.cov_scale * rng.normal();
      }
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  ds.class_counts.assign(num_classes, static_cast<std::int64_t>(per_class));
  return ds;
}

Dataset apply_imbalance(const Dataset& ds, const ImbalanceSpec& spec) {
  switch (spec.kind) {
    case ImbalanceSpec::Kind::None: return ds;
    case ImbalanceSpec::Kind::LongTailed: return apply_long_tail(ds, spec.rho, spec.seed);
    case ImbalanceSpec::Kind::Step:
      return apply_step(ds, spec.rho, spec.minority_classes, spec.seed);
  }
  throw std::invalid_argument("apply_imbalance: unknown kind");
}

Dataset apply_long_tail(const Dataset& ds, double rho, std::uint64_t seed) {
  validate(ds);
  const int num_classes = ds.num_classes();
  if (num_classes < 2) throw std::invalid_argument("apply_long_tail: need at least two classes");
  if (!(rho > 1.0)) throw std::invalid_argument("apply_long_tail: rho must be > 1");
  const auto n_max = static_cast<double>(ds.class_counts[0]);
  const double mu = std::pow(rho, -1.0 / static_cast<double>(num_classes - 1));
  std::vector<std::int64_t> targets(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    const auto want = std::llround(n_max * std::pow(mu, static_cast<double>(k)));
    if (want < 1) {
      throw std::invalid_argument("apply_long_tail: class " + std::to_string(k) +
                                  " would round to zero samples; lower rho or add data");
    }
    targets[static_cast<std::size_t>(k)] = want;
  }
  return subsample_by_class(ds, targets, seed);
}

Dataset apply_step(const Dataset& ds, double rho, int minority_classes, std::uint64_t seed) {
  validate(ds);
  const int num_classes = ds.num_classes();
  if (num_classes < 2) throw std::invalid_argument("apply_step: need at least two classes");
  if (!(rho > 1.0)) throw std::invalid_argument("apply_step: rho must be > 1");
  if (minority_classes < 1 || minority_classes >= num_classes) {
    throw std::invalid_argument("apply_step: minority_classes must lie in [1, " +
                                std::to_string(num_classes) + ")");
  }
  const std::int64_t n_max = ds.class_counts[0];
  const auto n_min = std::llround(static_cast<double>(n_max) / rho);
  if (n_min < 1) {
    throw std::invalid_argument("apply_step: minority count rounds to zero; lower rho or add data");
  }
  std::vector<std::int64_t> targets(static_cast<std::size_t>(num_classes), n_max);
  for (int k = num_classes - minority_classes; k < num_classes; ++k) {
    targets[static_cast<std::size_t>(k)] = n_min;
  }
  return subsample_by_class(ds, targets, seed);
}

double imbalance_ratio(const Dataset& ds) {
  if (ds.class_counts.empty()) throw std::invalid_argument("imbalance_ratio: no classes");
  std::int64_t lo = ds.class_counts[0], hi = ds.class_counts[0];
  for (std::int64_t c : ds.class_counts) {
    if (c < 1) throw std::invalid_argument("imbalance_ratio: a class is empty");
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return static_cast<double>(hi) / static_cast<double>(lo);
}

Dataset load_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = s.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(s.substr(start));
        break;
      }
      fields.push_back(s.substr(start, comma - start));
      start = comma + 1;
    }
    return fields;
  };

  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 2 || header.back() != "label") {
    throw std::invalid_argument(path + ":1: header must be f0,...,f{d-1},label");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[c] != "f" + std::to_string(c)) {
      throw std::invalid_argument(path + ":1: expected column 'f" + std::to_string(c) +
                                  "', got '" + header[c] + "'");
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != dim + 1) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim + 1) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const char* s = fields[c].c_str();
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      if (end == s || *end != '\0' || !std::isfinite(v)) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                    ": bad feature value '" + fields[c] + "'");
      }
      values.push_back(v);
    }
    const char* s = fields[dim].c_str();
    char* end = nullptr;
    const long y = std::strtol(s, &end, 10);
    if (end == s || *end != '\0' || y < 0 || y > 1'000'000) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad label '" +
                                  fields[dim] + "'");
    }
    labels.push_back(static_cast<int>(y));
  }
  if (labels.empty()) throw std::invalid_argument(path + ": no data rows");

  Dataset ds;
  ds.name = std::filesystem::path(path).stem().string();
  const std::size_t n = labels.size();
  ds.features = Matrix(n, dim);
  ds.features.data() = std::move(values);
  ds.labels = std::move(labels);
  const int num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.class_counts = counts_from_labels(ds.labels, num_classes);
  for (int k = 0; k < num_classes; ++k) {
    if (ds.class_counts[static_cast<std::size_t>(k)] == 0) {
      throw std::invalid_argument(path + ": label set is not contiguous, class " +
                                  std::to_string(k) + " is missing");
    }
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  validate(ds);
  std::string csv;
  for (int c = 0; c < ds.dim(); ++c) csv += "f" + std::to_string(c) + ",";
  csv += "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t c = 0; c < ds.features.cols(); ++c) {
      csv += format_double(ds.features(i, c));
      csv += ',';
    }
    csv += std::to_string(ds.labels[i]);
    csv += '\n';
  }
  write_file_atomic(path, csv);

  std::string meta;
  meta += "name = " + ds.name + "\n";
  meta += "samples = " + std::to_string(ds.size()) + "\n";
  meta += "features = " + std::to_string(ds.dim()) + "\n";
  meta += "classes = " + std::to_string(ds.num_classes()) + "\n";
  meta += "class_counts =";
  for (std::int64_t c : ds.class_counts) meta += " " + std::to_string(c);
  meta += "\n";
  meta += "imbalance_ratio = " + format_double(imbalance_ratio(ds)) + "\n";
  for (const auto& [key, value] : extra_meta) meta += key + " = " + value + "\n";
  write_file_atomic(path + ".meta", meta);
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
  validate(ds);
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: test_fraction must lie in (0, 1)");
  }
  std::int64_t per_class = -1;
  for (std::int64_t c : ds.class_counts) {
    const auto t = static_cast<std::int64_t>(std::floor(static_cast<double>(c) * test_fraction));
    per_class = per_class < 0 ? t : std::min(per_class, t);
  }
  if (per_class < 1) {
    throw std::invalid_argument(
        "stratified_split: test_fraction too small, some class would contribute no test sample");
  }
  const auto by_class = indices_by_class(ds);
  Rng root(seed);
  std::vector<std::size_t> test_rows, train_rows;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    const auto& members = by_class[k];
    Rng rng = root.split(k);
    const auto perm = rng.permutation(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& side = i < static_cast<std::size_t>(per_class) ? test_rows : train_rows;
      side.push_back(members[perm[i]]);
    }
  }
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

}  // namespace ib

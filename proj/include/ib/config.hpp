#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ib/losses.hpp"
#include "ib/trainer.hpp"

namespace ib {

// INI-style configuration: "[section]" headers, "key = value" lines, '#'
// comments. Keys are tracked on read so unknown (misspelled) entries can be
// reported with their full path.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_text(const std::string& text, const std::string& origin);

  void set(const std::string& section, const std::string& key, const std::string& value);

  // "section.key=value"; a path without a dot addresses the top level.
  void apply_override(const std::string& assignment);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  // Whitespace-separated lists.
  std::vector<int> get_ints(const std::string& section, const std::string& key) const;

  // Throws listing every key that was never read.
  void check_consumed() const;

  std::string describe(const std::string& section, const std::string& key) const;

 private:
  struct Entry {
    std::string value;
    mutable bool used = false;
  };
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::string origin_ = "<config>";
};

struct DataConfig {
  enum class Source { Gaussian, Csv };
  Source source = Source::Gaussian;

  std::vector<Vector> means;  // gaussian: one center per class
  double cov_scale = 1.0;
  int n_per_class = 100;

  std::string csv_path;  // csv source

  double test_fraction = 0.0;  // 0 disables the balanced test split
  ImbalanceSpec::Kind imbalance = ImbalanceSpec::Kind::None;
  double rho = 1.0;
  int minority_classes = 1;
};

struct ReportConfig {
  std::int64_t top_m = 10;
  int top_k = 1;
};

// One seed drives the whole experiment; sub-seeds for data generation,
// splitting, imbalance, initialization and shuffling are derived from it.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  DataConfig data;
  std::vector<int> layer_sizes;
  TrainConfig train;
  ReportConfig report;

  static ExperimentConfig load(const std::string& path,
                               const std::vector<std::string>& overrides = {});
  static ExperimentConfig from_map(ConfigMap& map);

  // Canonical echo with every default materialized; feeding it back
  // reproduces the identical run.
  std::string resolved_ini() const;
};

LossSpec loss_spec_from_map(const ConfigMap& map, const std::string& section);

}  // namespace ib

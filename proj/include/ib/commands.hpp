#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ib/config.hpp"
#include "ib/data.hpp"

namespace ib {

// Materialized data for one experiment: the (possibly imbalanced) train
// split plus a balanced test split. test is empty when test_fraction = 0.
// Order matches the evaluation protocol: split first, then imbalance the
// train side only.
struct PreparedData {
  Dataset train;
  Dataset test;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Writes dataset.csv (no split) or train.csv/test.csv plus .meta sidecars.
void cmd_gen_data(const ExperimentConfig& cfg);

// Trains per the config; writes config_resolved.ini, train.csv/test.csv,
// checkpoint.bin and history.tsv into the output directory.
void cmd_train(const ExperimentConfig& cfg);

// Writes metrics.txt and class_metrics.tsv.
void cmd_eval(const std::string& checkpoint_path, const std::string& data_csv, int top_k,
              const std::string& out_dir);

// Writes influence_summary.txt, influence_samples.tsv and influence_top.tsv.
// For a single-layer model with a small enough final layer the summary also
// carries the exact-influence rank correlation.
void cmd_influence(const std::string& checkpoint_path, const std::string& data_csv,
                   std::int64_t top_m, const std::string& out_dir);

struct SweepSpec {
  std::string axis;  // transition_epoch | norm | epsilon | loss
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
};

// Runs the full pipeline per (value, seed) cell, appending each finished
// cell to sweep_cells.tsv, and writes the aggregated mean +- sample-stddev
// table to sweep.tsv. A failing cell aborts with its identity; completed
// cells stay on disk.
void cmd_sweep(const ExperimentConfig& cfg, const SweepSpec& spec);

}  // namespace ib

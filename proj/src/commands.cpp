#include "ib/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ib/eval.hpp"
#include "ib/io.hpp"
#include "ib/trainer.hpp"

namespace ib {

namespace {

// Sub-seed streams derived from the experiment seed.
constexpr std::uint64_t kStreamData = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamImbalance = 3;
constexpr std::uint64_t kStreamInit = 4;
constexpr std::uint64_t kStreamShuffle = 5;

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::string imbalance_name(ImbalanceSpec::Kind kind) {
  switch (kind) {
    case ImbalanceSpec::Kind::None: return "none";
    case ImbalanceSpec::Kind::LongTailed: return "longtail";
    case ImbalanceSpec::Kind::Step: return "step";
  }
  return "?";
}

std::vector<std::pair<std::string, std::string>> data_meta(const ExperimentConfig& cfg,
                                                           const std::string& role) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("role", role);
  meta.emplace_back("source",
                    cfg.data.source == DataConfig::Source::Gaussian ? "gaussian" : "csv");
  meta.emplace_back("imbalance", role == "test" ? "none" : imbalance_name(cfg.data.imbalance));
  if (role != "test" && cfg.data.imbalance != ImbalanceSpec::Kind::None) {
    meta.emplace_back("rho", format_double(cfg.data.rho));
    if (cfg.data.imbalance == ImbalanceSpec::Kind::Step) {
      meta.emplace_back("minority_classes", std::to_string(cfg.data.minority_classes));
    }
  }
  meta.emplace_back("seed", std::to_string(cfg.seed));
  return meta;
}

MLPParams init_from_config(const ExperimentConfig& cfg, const PreparedData& data) {
  if (cfg.layer_sizes.front() != data.train.dim()) {
    throw std::invalid_argument("[model] layer_sizes: input width " +
                                std::to_string(cfg.layer_sizes.front()) +
                                " does not match the dataset feature count " +
                                std::to_string(data.train.dim()));
  }
  if (cfg.layer_sizes.back() != data.train.num_classes()) {
    throw std::invalid_argument("[model] layer_sizes: output width " +
                                std::to_string(cfg.layer_sizes.back()) +
                                " does not match the dataset class count " +
                                std::to_string(data.train.num_classes()));
  }
  return init_model(cfg.layer_sizes, mix_seed(cfg.seed, kStreamInit));
}

struct CellResult {
  double overall = 0.0;
  double minority = 0.0;
};

CellResult run_cell(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  if (data.test.size() == 0) {
    throw std::invalid_argument("sweep: data.test_fraction must be > 0 so cells can be scored");
  }
  MLPParams model = init_from_config(cfg, data);
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, kStreamShuffle);
  TrainResult result = train(std::move(model), data.train, tc);
  const Metrics metrics = evaluate(result.model, data.test, cfg.report.top_k);
  const std::size_t minority_class = static_cast<std::size_t>(
      std::min_element(data.train.class_counts.begin(), data.train.class_counts.end()) -
      data.train.class_counts.begin());
  return {metrics.overall, metrics.per_class[minority_class]};
}

ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis,
                            const std::string& value) {
  ExperimentConfig cfg = base;
  if (axis == "transition_epoch") {
    cfg.train.transition_epoch = static_cast<int>(std::stoll(value));
  } else if (axis == "norm") {
    cfg.train.phase2_loss.ib_norm = parse_norm(value);
  } else if (axis == "epsilon") {
    if (value == "none") {
      cfg.train.phase2_loss.ib_use_factor = false;
    } else {
      cfg.train.phase2_loss.ib_use_factor = true;
      cfg.train.phase2_loss.epsilon = std::stod(value);
    }
  } else if (axis == "loss") {
    cfg.train.phase2_loss.kind = parse_loss_kind(value);
  } else {
    throw std::invalid_argument("sweep: unknown axis '" + axis +
                                "' (expected transition_epoch, norm, epsilon or loss)");
  }
  validate(cfg.train);
  return cfg;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  Dataset base;
  if (cfg.data.source == DataConfig::Source::Gaussian) {
    GaussianMixtureSpec spec;
    spec.means = cfg.data.means;
    spec.cov_scale = cfg.data.cov_scale;
    spec.n_per_class = cfg.data.n_per_class;
    spec.seed = mix_seed(cfg.seed, kStreamData);
    base = make_gaussian_mixture(spec);
  } else {
    base = load_csv(cfg.data.csv_path);
  }

  PreparedData out;
  if (cfg.data.test_fraction > 0.0) {
    auto [train, test] = stratified_split(base, cfg.data.test_fraction,
                                          mix_seed(cfg.seed, kStreamSplit));
    out.train = std::move(train);
    out.test = std::move(test);
  } else {
    out.train = std::move(base);
  }

  ImbalanceSpec imb;
  imb.kind = cfg.data.imbalance;
  imb.rho = cfg.data.rho;
  imb.minority_classes = cfg.data.minority_classes;
  imb.seed = mix_seed(cfg.seed, kStreamImbalance);
  out.train = apply_imbalance(out.train, imb);
  return out;
}

void cmd_gen_data(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  make_dirs(cfg.output_dir);
  if (data.test.size() == 0) {
    save_csv(data.train, join(cfg.output_dir, "dataset.csv"), data_meta(cfg, "dataset"));
  } else {
    save_csv(data.train, join(cfg.output_dir, "train.csv"), data_meta(cfg, "train"));
    save_csv(data.test, join(cfg.output_dir, "test.csv"), data_meta(cfg, "test"));
  }
}

void cmd_train(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  MLPParams model = init_from_config(cfg, data);
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, kStreamShuffle);
  TrainResult result = train(std::move(model), data.train, tc);

  make_dirs(cfg.output_dir);
  write_file_atomic(join(cfg.output_dir, "config_resolved.ini"), cfg.resolved_ini());
  save_csv(data.train, join(cfg.output_dir, "train.csv"), data_meta(cfg, "train"));
  if (data.test.size() > 0) {
    save_csv(data.test, join(cfg.output_dir, "test.csv"), data_meta(cfg, "test"));
  }
  save_checkpoint(result.model, join(cfg.output_dir, "checkpoint.bin"));
  save_history(result.history, join(cfg.output_dir, "history.tsv"));
}

void cmd_eval(const std::string& checkpoint_path, const std::string& data_csv, int top_k,
              const std::string& out_dir) {
  const MLPParams model = load_checkpoint(checkpoint_path);
  const Dataset ds = load_csv(data_csv);
  const Metrics metrics = evaluate(model, ds, top_k);

  make_dirs(out_dir);
  std::string summary;
  summary += "checkpoint = " + checkpoint_path + "\n";
  summary += "dataset = " + data_csv + "\n";
  summary += "test_samples = " + std::to_string(ds.size()) + "\n";
  summary += "classes = " + std::to_string(ds.num_classes()) + "\n";
  summary += "overall_accuracy = " + format_double(metrics.overall) + "\n";
  summary += "top_k = " + std::to_string(metrics.k) + "\n";
  summary += "top_k_accuracy = " + format_double(metrics.top_k) + "\n";
  write_file_atomic(join(out_dir, "metrics.txt"), summary);

  std::string table = "class\ttest_count\taccuracy";
  for (int c = 0; c < ds.num_classes(); ++c) table += "\tpred_" + std::to_string(c);
  table += "\n";
  for (std::size_t r = 0; r < static_cast<std::size_t>(ds.num_classes()); ++r) {
    table += std::to_string(r) + "\t" + std::to_string(ds.class_counts[r]) + "\t" +
             format_double(metrics.per_class[r]);
    for (std::size_t c = 0; c < static_cast<std::size_t>(ds.num_classes()); ++c) {
      table += "\t" + std::to_string(static_cast<std::int64_t>(metrics.confusion(r, c)));
    }
    table += "\n";
  }
  write_file_atomic(join(out_dir, "class_metrics.tsv"), table);
}

void cmd_influence(const std::string& checkpoint_path, const std::string& data_csv,
                   std::int64_t top_m, const std::string& out_dir) {
  if (top_m < 1) throw std::invalid_argument("influence: top_m must be >= 1");
  const MLPParams model = load_checkpoint(checkpoint_path);
  const Dataset ds = load_csv(data_csv);
  const InfluenceReport rep = influence_report(model, ds, static_cast<std::size_t>(top_m));

  const auto num_classes = static_cast<std::size_t>(ds.num_classes());
  const std::size_t majority = static_cast<std::size_t>(
      std::max_element(ds.class_counts.begin(), ds.class_counts.end()) - ds.class_counts.begin());
  const std::size_t minority = static_cast<std::size_t>(
      std::min_element(ds.class_counts.begin(), ds.class_counts.end()) - ds.class_counts.begin());

  make_dirs(out_dir);
  std::string summary;
  summary += "checkpoint = " + checkpoint_path + "\n";
  summary += "dataset = " + data_csv + "\n";
  summary += "samples = " + std::to_string(ds.size()) + "\n";
  summary += "top_m = " + std::to_string(top_m) + "\n";
  const auto [lo, hi] = std::minmax_element(rep.raw.begin(), rep.raw.end());
  summary += "raw_min = " + format_double(*lo) + "\n";
  summary += "raw_max = " + format_double(*hi) + "\n";
  summary += std::string("degenerate_scaling = ") + (*hi > *lo ? "false" : "true") + "\n";
  for (std::size_t k = 0; k < num_classes; ++k) {
    summary += "class_" + std::to_string(k) +
               "_mean_normalized = " + format_double(rep.class_mean_normalized[k]) + "\n";
  }
  summary += "majority_class = " + std::to_string(majority) + "\n";
  summary += "minority_class = " + std::to_string(minority) + "\n";
  const bool majority_dominates =
      rep.class_mean_normalized[majority] > rep.class_mean_normalized[minority];
  summary += std::string("majority_mean_exceeds_minority = ") +
             (majority_dominates ? "true" : "false") + "  # soft check, non-fatal\n";

  // Exact-influence cross-check where the dense oracle is feasible.
  if (model.num_layers() == 1 &&
      static_cast<std::size_t>(model.num_classes() * model.input_dim()) <= 500) {
    const double damping = 1e-4;
    const ExactInfluence exact = exact_influence(model, ds, damping);
    summary += "exact_influence_damping = " + format_double(damping) + "\n";
    summary += "spearman_factor_vs_exact = " +
               format_double(spearman_rank_corr(rep.raw, exact.l1_norms)) + "\n";
  }
  write_file_atomic(join(out_dir, "influence_summary.txt"), summary);

  std::string samples = "sample\tlabel\traw\tnormalized\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    samples += std::to_string(i) + "\t" + std::to_string(ds.labels[i]) + "\t" +
               format_double(rep.raw[i]) + "\t" + format_double(rep.normalized[i]) + "\n";
  }
  write_file_atomic(join(out_dir, "influence_samples.tsv"), samples);

  std::string top = "class\trank\tsample\traw\tnormalized\n";
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t r = 0; r < rep.top_per_class[k].size(); ++r) {
      const std::size_t i = rep.top_per_class[k][r];
      top += std::to_string(k) + "\t" + std::to_string(r + 1) + "\t" + std::to_string(i) + "\t" +
             format_double(rep.raw[i]) + "\t" + format_double(rep.normalized[i]) + "\n";
    }
  }
  write_file_atomic(join(out_dir, "influence_top.tsv"), top);
}

void cmd_sweep(const ExperimentConfig& cfg, const SweepSpec& spec) {
  if (spec.values.empty()) throw std::invalid_argument("sweep: no axis values given");
  if (spec.seeds.empty()) throw std::invalid_argument("sweep: no seeds given");
  make_dirs(cfg.output_dir);
  const std::string cells_path = join(cfg.output_dir, "sweep_cells.tsv");
  {
    std::ofstream cells(cells_path, std::ios::trunc);
    if (!cells) throw std::runtime_error("cannot open for writing: " + cells_path);
    cells << "axis\tvalue\tseed\toverall_accuracy\tminority_accuracy\n";
  }

  struct RowStats {
    std::vector<double> overall, minority;
  };
  std::vector<RowStats> rows(spec.values.size());

  for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
    for (std::uint64_t seed : spec.seeds) {
      const std::string cell_id =
          "axis=" + spec.axis + " value=" + spec.values[vi] + " seed=" + std::to_string(seed);
      CellResult cell;
      try {
        ExperimentConfig cell_cfg = apply_axis(cfg, spec.axis, spec.values[vi]);
        cell_cfg.seed = seed;
        cell = run_cell(cell_cfg);
      } catch (const std::exception& e) {
        throw std::runtime_error("sweep cell " + cell_id + " failed: " + e.what());
      }
      rows[vi].overall.push_back(cell.overall);
      rows[vi].minority.push_back(cell.minority);
      std::ofstream cells(cells_path, std::ios::app);
      cells << spec.axis << '\t' << spec.values[vi] << '\t' << seed << '\t'
            << format_double(cell.overall) << '\t' << format_double(cell.minority) << '\n';
      cells.flush();
    }
  }

  auto mean_std = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double std_dev = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return std::pair<double, double>{mean, std_dev};
  };

  std::string table =
      "axis\tvalue\tseeds\toverall_mean\toverall_std\tminority_mean\tminority_std\n";
  for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
    const auto [om, os] = mean_std(rows[vi].overall);
    const auto [mm, ms] = mean_std(rows[vi].minority);
    table += spec.axis + "\t" + spec.values[vi] + "\t" + std::to_string(spec.seeds.size()) + "\t" +
             format_double(om) + "\t" + format_double(os) + "\t" + format_double(mm) + "\t" +
             format_double(ms) + "\n";
  }
  write_file_atomic(join(cfg.output_dir, "sweep.tsv"), table);
}

}  // namespace ib

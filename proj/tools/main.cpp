#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ib/commands.hpp"
#include "ib/config.hpp"

namespace {

// Exit codes: 0 success, 1 validation error, 2 runtime/numerical error.
constexpr int kOkExit = 0;
constexpr int kValidationExit = 1;
constexpr int kRuntimeExit = 2;

ib::ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& sets,
                                 const std::string& out_dir) {
  ib::ExperimentConfig cfg = ib::ExperimentConfig::load(path, sets);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  return cfg;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      if (start < s.size()) out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence-balanced loss experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, data_csv;
  std::vector<std::string> sets;
  int top_k = 1;
  std::int64_t top_m = -1;
  std::string axis, values_arg, seeds_arg;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "experiment config file")->required();
    cmd->add_option("-o,--out", out_dir, "output directory (overrides output_dir)");
    cmd->add_option("-s,--set", sets, "dotted-path override, e.g. train.epochs=10");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate dataset CSV files");
  add_config_opts(gen);

  CLI::App* tr = app.add_subcommand("train", "train a model per the config");
  add_config_opts(tr);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->add_option("--checkpoint", checkpoint, "model checkpoint file")->required();
  ev->add_option("--data", data_csv, "dataset CSV")->required();
  ev->add_option("--top-k", top_k, "k for top-k accuracy");
  ev->add_option("-o,--out", out_dir, "output directory")->required();

  CLI::App* infl = app.add_subcommand("influence", "per-sample influence report");
  infl->add_option("--checkpoint", checkpoint, "model checkpoint file")->required();
  infl->add_option("--data", data_csv, "dataset CSV")->required();
  infl->add_option("--top-m", top_m, "top samples per class");
  infl->add_option("-o,--out", out_dir, "output directory")->required();

  CLI::App* sw = app.add_subcommand("sweep", "run one axis over several seeds");
  add_config_opts(sw);
  sw->add_option("--axis", axis, "transition_epoch | norm | epsilon | loss")->required();
  sw->add_option("--values", values_arg, "comma-separated axis values")->required();
  sw->add_option("--seeds", seeds_arg, "comma-separated seeds")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOkExit : kValidationExit;
  }

  try {
    if (gen->parsed()) {
      cmd_gen_data(load_config(config_path, sets, out_dir));
    } else if (tr->parsed()) {
      cmd_train(load_config(config_path, sets, out_dir));
    } else if (ev->parsed()) {
      ib::cmd_eval(checkpoint, data_csv, top_k, out_dir);
    } else if (infl->parsed()) {
      ib::ExperimentConfig defaults;  // only report.top_m is relevant here
      ib::cmd_influence(checkpoint, data_csv, top_m > 0 ? top_m : defaults.report.top_m, out_dir);
    } else if (sw->parsed()) {
      ib::SweepSpec spec;
      spec.axis = axis;
      spec.values = split_commas(values_arg);
      for (const std::string& s : split_commas(seeds_arg)) {
        spec.seeds.push_back(std::stoull(s));
      }
      ib::cmd_sweep(load_config(config_path, sets, out_dir), spec);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidationExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeExit;
  }
  return kOkExit;
}

// Experiment driver for the reject-aware credit scoring models.
//
// Subcommands: gen-data, train, evaluate, summary, bench. Every run is a
// pure function of the config file (plus input files), so rerunning a
// command reproduces its outputs byte for byte.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rmtnet/commands.hpp"
#include "rmtnet/error.hpp"
#include "rmtnet/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long seed = -1;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config = true) {
  auto* opt = cmd->add_option("--config", args.config_path,
                              "experiment config file (key = value lines)");
  if (need_config) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides out.dir)");
  cmd->add_option("--seed", args.seed, "base seed (overrides the config)");
  cmd->add_option("--jobs", args.jobs,
                  "max concurrent runs (0 = hardware threads)");
}

rmt::ExperimentConfig resolve(const CommonArgs& args) {
  rmt::KvConfig kv = args.config_path.empty()
                         ? rmt::KvConfig{}
                         : rmt::KvConfig::parse_file(args.config_path);
  if (args.seed >= 0) kv.set("seed", std::to_string(args.seed));
  if (!args.out_dir.empty()) kv.set("out.dir", args.out_dir);
  return rmt::ExperimentConfig::from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reject-aware multi-task credit scoring toolkit"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, summary_args, bench_args;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "generate a dataset with synthetic MNAR rejections");
  add_common(gen, gen_args);
  CLI::App* train = app.add_subcommand(
      "train", "train a model over the sweep grid and keep the best snapshot");
  add_common(train, train_args);
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score snapshots on the test subsets and emit reports");
  add_common(evaluate, eval_args);
  CLI::App* summary = app.add_subcommand(
      "summary", "per-group feature means of a raw CSV");
  add_common(summary, summary_args);
  CLI::App* bench = app.add_subcommand(
      "bench", "run the full synthetic benchmark across models and seeds");
  add_common(bench, bench_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      rmt::cmd::gen_data(resolve(gen_args));
    } else if (train->parsed()) {
      rmt::cmd::train(resolve(train_args), train_args.jobs);
    } else if (evaluate->parsed()) {
      rmt::cmd::evaluate(resolve(eval_args));
    } else if (summary->parsed()) {
      rmt::cmd::summary(resolve(summary_args));
    } else if (bench->parsed()) {
      rmt::cmd::bench(resolve(bench_args), bench_args.jobs);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

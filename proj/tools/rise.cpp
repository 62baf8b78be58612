// Command-line entry points for training, evaluation, standalone voting,
// and problem-set export.

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "rise/cli.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* cmd, bool config_required = true) {
    auto* cfg = cmd->add_option("--config", config, "experiment configuration file");
    if (config_required) cfg->required();
    seed_opt = cmd->add_option("--seed-override", seed, "replace the root seed");
    out_opt = cmd->add_option("--out", out, "output directory");
    threads_opt = cmd->add_option("--threads", threads, "worker thread count");
  }

  rise::CliOverrides overrides() const {
    rise::CliOverrides o;
    if (seed_opt && seed_opt->count() > 0) o.seed = seed;
    if (out_opt && out_opt->count() > 0) o.out = out;
    if (threads_opt && threads_opt->count() > 0) o.threads = threads;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rise: joint solution/self-verification RL on synthetic arithmetic tasks"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run a training experiment");
  CommonArgs train_args;
  train_args.attach(train);
  std::string train_checkpoint;
  train->add_option("--checkpoint", train_checkpoint, "resume from this checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CommonArgs eval_args;
  eval_args.attach(eval);
  std::string eval_checkpoint;
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")->required();

  auto* vote = app.add_subcommand(
      "vote", "majority and verification-weighted voting over a solutions file");
  CommonArgs vote_args;
  vote_args.attach(vote, /*config_required=*/false);
  std::string vote_solutions;
  bool vote_continuous = false;
  vote->add_option("--solutions", vote_solutions,
                   "JSONL rows {problem_id, answer, score[, ground_truth]}")
      ->required();
  vote->add_flag("--continuous", vote_continuous,
                 "treat scores as continuous in [0,1], threshold 0.5");

  auto* export_cmd =
      app.add_subcommand("problems-export", "write the generated problem set as JSONL");
  CommonArgs export_args;
  export_args.attach(export_cmd);
  std::string export_out = "problems.jsonl";
  export_cmd->add_option("--out-file", export_out, "output file (default problems.jsonl)");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    rise::CliOverrides overrides = train_args.overrides();
    if (!train_checkpoint.empty()) overrides.checkpoint = train_checkpoint;
    return rise::cmd_train(train_args.config, overrides);
  }
  if (eval->parsed()) {
    return rise::cmd_eval(eval_checkpoint, eval_args.config, eval_args.overrides());
  }
  if (vote->parsed()) {
    rise::CliOverrides overrides = vote_args.overrides();
    overrides.continuous_scores = vote_continuous;
    std::optional<std::filesystem::path> cfg;
    if (!vote_args.config.empty()) cfg = vote_args.config;
    return rise::cmd_vote(vote_solutions, cfg, overrides);
  }
  if (export_cmd->parsed()) {
    return rise::cmd_problems_export(export_args.config, export_out, export_args.overrides());
  }
  return 1;
}

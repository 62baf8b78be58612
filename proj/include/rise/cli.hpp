#pragma once

// Command implementations behind the rise tool: train, eval, vote, and
// problems-export. Each command owns its run directory exclusively (lock
// file), writes a resolved-config snapshot plus a schema-version marker,
// and reports errors on stderr with a non-zero exit status.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rise/checkpoint.hpp"
#include "rise/config.hpp"
#include "rise/eval.hpp"
#include "rise/tasks.hpp"
#include "rise/trainer.hpp"
#include "rise/util.hpp"
#include "rise/verifier.hpp"
#include "rise/vocab.hpp"

namespace rise {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> checkpoint;  // resume source for train
  bool continuous_scores = false;         // vote: threshold scores at 0.5
};

namespace detail {

class RunDirLock {
 public:
  explicit RunDirLock(const std::filesystem::path& dir) : lock_path_(dir / ".lock") {
    if (std::filesystem::exists(lock_path_)) {
      throw io_error("run directory is locked (remove " + lock_path_.string() +
                     " if no other run is active)");
    }
    std::ofstream lock(lock_path_);
    if (!lock) throw io_error("cannot create lock file: " + lock_path_.string());
    lock << "locked\n";
  }
  ~RunDirLock() {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
  }
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write file: " + path.string());
  out << content;
}

inline void write_run_markers(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  write_text_file(dir / "schema_version", std::to_string(kRunSchemaVersion) + "\n");
  write_text_file(dir / "resolved.conf", emit_config(cfg));
}

inline ExperimentConfig load_resolved(const std::filesystem::path& config_path,
                                      const CliOverrides& overrides) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.out) cfg.out_dir = *overrides.out;
  if (overrides.threads) cfg.threads = *overrides.threads;
  return resolve_config(std::move(cfg));
}

}  // namespace detail

// Seed fan-out from the root seed; one named stream per component.
struct ComponentSeeds {
  std::uint64_t tasks;
  std::uint64_t eval_problems;
  std::uint64_t trainer;
  std::uint64_t eval;
};

inline ComponentSeeds derive_component_seeds(std::uint64_t root) {
  return ComponentSeeds{
      derive_seed(root, "tasks"),
      derive_seed(root, "eval-problems"),
      derive_seed(root, "trainer"),
      derive_seed(root, "eval"),
  };
}

inline int cmd_train(const std::filesystem::path& config_path, const CliOverrides& overrides = {}) {
  try {
    const ExperimentConfig cfg = detail::load_resolved(config_path, overrides);
    const ComponentSeeds seeds = derive_component_seeds(cfg.seed);
    const Vocabulary vocab;
    const VerificationTemplate tmpl = VerificationTemplate::builtin();

    const std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);
    detail::RunDirLock lock(out_dir);
    detail::write_run_markers(out_dir, cfg);

    TrainInputs inputs;
    inputs.task = cfg.task_spec(seeds.tasks);
    inputs.num_problems = cfg.num_problems;
    inputs.model = cfg.model(vocab.size());
    inputs.trainer = cfg.trainer;
    inputs.trainer.seed = seeds.trainer;
    inputs.trainer.threads = cfg.threads;
    inputs.rl = cfg.rl;
    inputs.metrics_path = out_dir / "metrics.jsonl";
    inputs.checkpoint_dir = out_dir / "checkpoints";
    if (!cfg.offline_verification.empty()) {
      inputs.offline_mode = true;
      inputs.offline_records = load_offline_records(cfg.offline_verification);
    }
    if (overrides.checkpoint) {
      inputs.resume = load_checkpoint(*overrides.checkpoint);
      require_same_arch(inputs.model, inputs.resume->actor.cfg, "resume");
    }

    train(inputs, vocab, tmpl);
    std::cout << "training complete; outputs in " << out_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "rise train: " << e.what() << "\n";
    return 1;
  }
}

inline int cmd_eval(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& config_path, const CliOverrides& overrides = {}) {
  try {
    const ExperimentConfig cfg = detail::load_resolved(config_path, overrides);
    const ComponentSeeds seeds = derive_component_seeds(cfg.seed);
    const Vocabulary vocab;
    const VerificationTemplate tmpl = VerificationTemplate::builtin();

    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    require_same_arch(cfg.model(vocab.size()), ckpt.actor.cfg, "eval");

    TaskSpec eval_spec = cfg.task_spec(seeds.eval_problems);
    const std::vector<Problem> problems = generate_problems(eval_spec, cfg.eval_num_problems);

    const std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);
    detail::RunDirLock lock(out_dir);
    detail::write_run_markers(out_dir, cfg);

    const EvalReport report =
        evaluate(ckpt.actor, vocab, problems, cfg.eval_options(seeds.eval), tmpl);

    detail::write_text_file(out_dir / "report.json", eval_report_to_json(report).dump(2) + "\n");
    std::ofstream records(out_dir / "records.jsonl", std::ios::trunc);
    if (!records) throw io_error("cannot write records.jsonl");
    for (const ProblemReport& pr : report.problems) {
      records << problem_report_to_json(pr).dump() << '\n';
    }
    detail::write_text_file(out_dir / "metrics.csv", eval_report_to_csv(report));
    std::cout << "evaluation complete; outputs in " << out_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "rise eval: " << e.what() << "\n";
    return 1;
  }
}

// One external-solutions row for standalone voting.
struct VoteRow {
  std::string problem_id;
  std::optional<std::string> answer;
  int normalized_score = 0;
  std::optional<std::string> ground_truth;
};

inline int cmd_vote(const std::filesystem::path& solutions_path,
                    const std::optional<std::filesystem::path>& config_path,
                    const CliOverrides& overrides = {}) {
  try {
    VoteConfig vote;
    std::string out_dir_str = "vote-out";
    if (config_path) {
      const ExperimentConfig cfg = detail::load_resolved(*config_path, overrides);
      vote.alpha = cfg.vote_alpha;
      vote.d = cfg.vote_d;
      vote.score_sum_over_all = cfg.score_sum_over_all;
      out_dir_str = cfg.out_dir;
    }
    if (overrides.out) out_dir_str = *overrides.out;

    std::ifstream in(solutions_path);
    if (!in) throw io_error("cannot open solutions file: " + solutions_path.string());

    std::map<std::string, std::vector<VoteRow>> by_problem;
    std::vector<std::string> problem_order;
    std::string line;
    std::size_t lineno = 0;
    std::size_t bad_rows = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(line);
        VoteRow row;
        row.problem_id = j.at("problem_id").get<std::string>();
        if (!j.at("answer").is_null()) {
          row.answer = canonicalize_answer(j.at("answer").get<std::string>());
        }
        const double score = j.at("score").get<double>();
        row.normalized_score =
            overrides.continuous_scores ? normalize_continuous(score) : normalize_score(score);
        if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
          row.ground_truth = canonicalize_answer(j.at("ground_truth").get<std::string>());
        }
        if (by_problem.find(row.problem_id) == by_problem.end()) {
          problem_order.push_back(row.problem_id);
        }
        by_problem[row.problem_id].push_back(std::move(row));
      } catch (const std::exception& e) {
        ++bad_rows;
        std::cerr << solutions_path.string() << ":" << lineno << ": skipping malformed row: "
                  << e.what() << "\n";
      }
    }
    if (by_problem.empty()) throw io_error("no usable rows in " + solutions_path.string());

    const std::filesystem::path out_dir(out_dir_str);
    std::filesystem::create_directories(out_dir);
    detail::RunDirLock lock(out_dir);

    std::ofstream votes(out_dir / "votes.jsonl", std::ios::trunc);
    if (!votes) throw io_error("cannot write votes.jsonl");
    std::size_t with_gt = 0;
    std::size_t maj_hits = 0;
    std::size_t weighted_hits = 0;
    for (const std::string& pid : problem_order) {
      const auto& rows = by_problem[pid];
      std::vector<std::string> answers;
      std::vector<ScoredAnswer> scored;
      std::optional<std::string> gt;
      for (const VoteRow& row : rows) {
        if (row.answer) {
          answers.push_back(*row.answer);
          scored.push_back({*row.answer, row.normalized_score});
        }
        if (row.ground_truth) gt = row.ground_truth;
      }
      const std::string maj = majority_vote(answers);
      const std::string weighted = weighted_majority_vote(scored, vote);
      nlohmann::json j;
      j["problem_id"] = pid;
      j["majority_answer"] = maj;
      j["weighted_answer"] = weighted;
      if (gt) {
        ++with_gt;
        j["majority_correct"] = maj == *gt;
        j["weighted_correct"] = weighted == *gt;
        maj_hits += maj == *gt ? 1 : 0;
        weighted_hits += weighted == *gt ? 1 : 0;
      }
      votes << j.dump() << '\n';
    }

    nlohmann::json summary;
    summary["num_problems"] = by_problem.size();
    summary["skipped_rows"] = bad_rows;
    summary["alpha"] = vote.alpha;
    summary["d"] = vote.d;
    if (with_gt > 0) {
      summary["maj_at_k"] = static_cast<double>(maj_hits) / static_cast<double>(with_gt);
      summary["weighted_maj_at_k"] =
          static_cast<double>(weighted_hits) / static_cast<double>(with_gt);
    } else {
      summary["maj_at_k"] = nullptr;
      summary["weighted_maj_at_k"] = nullptr;
    }
    detail::write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "voting complete; outputs in " << out_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "rise vote: " << e.what() << "\n";
    return 1;
  }
}

inline int cmd_problems_export(const std::filesystem::path& config_path,
                               const std::filesystem::path& out_file,
                               const CliOverrides& overrides = {}) {
  try {
    const ExperimentConfig cfg = detail::load_resolved(config_path, overrides);
    const ComponentSeeds seeds = derive_component_seeds(cfg.seed);
    const std::vector<Problem> problems =
        generate_problems(cfg.task_spec(seeds.tasks), cfg.num_problems);
    std::ofstream out(out_file, std::ios::trunc);
    if (!out) throw io_error("cannot write problems file: " + out_file.string());
    for (const Problem& p : problems) {
      nlohmann::json j;
      j["id"] = p.id;
      j["statement"] = p.statement;
      j["answer"] = p.answer;
      out << j.dump() << '\n';
    }
    std::cout << "exported " << problems.size() << " problems to " << out_file.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "rise problems-export: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rise

#pragma once

// Evaluation: pass@1 over k samples, self-verification accuracy under the
// binary normalization rule, self-consistency voting, verification-weighted
// voting with Laplace smoothing, and the keyword-based behavioral metrics.
// All metrics are pure functions of (checkpoint, problems, options, seed).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rise/policy.hpp"
#include "rise/rng.hpp"
#include "rise/tasks.hpp"
#include "rise/util.hpp"
#include "rise/verifier.hpp"

namespace rise {

inline const std::vector<std::string> kVerificationKeywords = {
    "verify", "verifying", "recheck", "validate", "re-evaluate"};
inline const std::vector<std::string> kReflectionKeywords = {
    "wait", "however", "alternatively", "retry", "recheck"};

// Ties in both voting rules break to the lexicographically smallest
// canonical answer; the sentinel empty string marks "no usable answer".
struct VoteConfig {
  double alpha = 2.0;
  int d = 2;
  // Debug reading of the smoothed-score formula that sums scores over all
  // N solutions instead of per answer group (collapses to plain majority).
  bool score_sum_over_all = false;

  void validate() const {
    if (alpha < 0.0) throw config_error("vote: alpha must be >= 0");
    if (d < 1) throw config_error("vote: d must be >= 1");
  }
};

inline constexpr std::string_view kNoAnswer = "";

// Most frequent answer; ties lexicographically smallest. Callers exclude
// missing answers beforehand; an empty list yields the sentinel.
inline std::string majority_vote(std::span<const std::string> answers) {
  if (answers.empty()) return std::string(kNoAnswer);
  std::map<std::string, int> counts;
  for (const std::string& a : answers) counts[a] += 1;
  std::string best;
  int best_count = -1;
  for (const auto& [answer, count] : counts) {
    if (count > best_count) {
      best = answer;
      best_count = count;
    }
  }
  return best;
}

struct ScoredAnswer {
  std::string answer;
  int score = 0;  // normalized self-verification score in {0, 1}
};

// weight(a) = n_a * (alpha + sum of a's scores) / (n_a + alpha * d);
// argmax over answers, ties lexicographically smallest.
inline std::string weighted_majority_vote(std::span<const ScoredAnswer> records,
                                          const VoteConfig& config) {
  config.validate();
  if (records.empty()) return std::string(kNoAnswer);
  std::map<std::string, std::pair<int, int>> groups;  // answer -> (n, score sum)
  int total_score = 0;
  for (const ScoredAnswer& r : records) {
    auto& [n, sum] = groups[r.answer];
    n += 1;
    sum += r.score;
    total_score += r.score;
  }
  const auto n_total = static_cast<double>(records.size());
  std::string best;
  double best_weight = -1.0;
  for (const auto& [answer, group] : groups) {
    const auto [n, sum] = group;
    double weight;
    if (config.score_sum_over_all) {
      weight = n * (config.alpha + total_score) / (n_total + config.alpha * config.d);
    } else {
      weight = n * (config.alpha + sum) / (n + config.alpha * config.d);
    }
    if (weight > best_weight) {
      best = answer;
      best_weight = weight;
    }
  }
  return best;
}

// Fraction of texts containing at least one keyword, case-insensitive
// substring match.
inline double keyword_frequency(std::span<const std::string> texts,
                                std::span<const std::string> keywords) {
  if (texts.empty()) return 0.0;
  std::vector<std::string> lowered;
  lowered.reserve(keywords.size());
  for (const std::string& k : keywords) lowered.push_back(to_lower(k));
  std::size_t hits = 0;
  for (const std::string& text : texts) {
    for (const std::string& k : lowered) {
      if (contains_ci(text, k)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(texts.size());
}

struct TextOutcome {
  std::string text;
  bool correct = false;
};

// Accuracy restricted to keyword-bearing texts; nullopt when none qualify.
inline std::optional<double> self_verified_accuracy(std::span<const TextOutcome> records,
                                                    std::span<const std::string> keywords) {
  std::vector<std::string> lowered;
  lowered.reserve(keywords.size());
  for (const std::string& k : keywords) lowered.push_back(to_lower(k));
  std::size_t n = 0;
  std::size_t correct = 0;
  for (const TextOutcome& r : records) {
    bool has = false;
    for (const std::string& k : lowered) {
      if (contains_ci(r.text, k)) {
        has = true;
        break;
      }
    }
    if (!has) continue;
    ++n;
    if (r.correct) ++correct;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(n);
}

// ---------------------------------------------------------------- sampling

// Scripted-response hook shared by the sampling metrics; returns the
// response text for (problem index, sample index).
using ResponseSampler = std::function<std::string(std::size_t, std::size_t)>;

// pass@1 scoring rule over arbitrary response texts: the mean over all
// (problem, sample) pairs of exact final-answer match.
inline double pass_at_1_with_sampler(std::span<const Problem> problems, int k,
                                     const ResponseSampler& sampler) {
  if (k < 1) throw std::invalid_argument("pass_at_1: k must be >= 1");
  if (problems.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (std::size_t s = 0; s < static_cast<std::size_t>(k); ++s) {
      hits += outcome_reward(sampler(p, s), problems[p].answer) == OutcomeReward::correct;
    }
  }
  return static_cast<double>(hits) /
         static_cast<double>(problems.size() * static_cast<std::size_t>(k));
}

// pass@1 protocol: k independent samples per problem, each scored by exact
// match of the extracted answer; the metric is the mean over all samples.
// Per-sample seeds depend only on (seed, problem index, sample index), so
// raising k extends the sample set without changing existing samples.
inline double pass_at_1(const ActorParams& actor, const Vocabulary& vocab,
                        std::span<const Problem> problems, int k, double temperature,
                        std::uint64_t seed, int max_response_len = 160, int threads = 1) {
  if (k < 1) throw std::invalid_argument("pass_at_1: k must be >= 1");
  if (problems.empty()) return 0.0;
  const std::size_t n = problems.size() * static_cast<std::size_t>(k);
  std::vector<int> correct(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::size_t p = i / static_cast<std::size_t>(k);
    const std::size_t s = i % static_cast<std::size_t>(k);
    const std::vector<int> prompt = render_prompt(vocab, problems[p]);
    const Trajectory traj = sample_response(actor, vocab, prompt, temperature, max_response_len,
                                            derive_seed(seed, "gen", p, s));
    correct[i] = outcome_reward(traj.rendered_text, problems[p].answer) == OutcomeReward::correct;
  });
  std::size_t hits = 0;
  for (int c : correct) hits += static_cast<std::size_t>(c);
  return static_cast<double>(hits) / static_cast<double>(n);
}

// A solution to be self-verified, with its outcome-verifier ground truth.
struct SolutionRecord {
  std::string statement;
  std::string solution_text;
  OutcomeReward gt_reward = OutcomeReward::unboxed;
};

// Extracted score of a verification response normalized to {0, 1};
// unparseable or unboxed responses count as predicted-incorrect.
inline int verification_prediction_from_text(std::string_view verification_response) {
  const auto boxed = extract_boxed_answer(verification_response);
  return boxed ? normalize_score(*boxed) : 0;
}

// Accuracy of given verification responses against the records' normalized
// ground-truth rewards.
inline double verification_accuracy_from_texts(std::span<const SolutionRecord> records,
                                               std::span<const std::string> verification_texts) {
  if (records.size() != verification_texts.size()) {
    throw std::invalid_argument("verification_accuracy_from_texts: size mismatch");
  }
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    hits += verification_prediction_from_text(verification_texts[r]) ==
            normalize_score(records[r].gt_reward);
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

// One verification response per record; the prediction is the extracted
// score normalized to {0, 1} (unparseable -> 0) and compared against the
// normalized ground-truth reward.
inline std::vector<int> verification_predictions(const ActorParams& actor, const Vocabulary& vocab,
                                                 std::span<const SolutionRecord> records,
                                                 double temperature,
                                                 const VerificationTemplate& tmpl,
                                                 std::uint64_t seed, int max_response_len = 160,
                                                 int threads = 1) {
  std::vector<int> predictions(records.size(), 0);
  parallel_for(records.size(), threads, [&](std::size_t r) {
    Problem synth;
    synth.id = "record-" + std::to_string(r);
    synth.statement = records[r].statement;
    const auto item = build_verification_item(synth, records[r].solution_text,
                                              records[r].gt_reward, tmpl, vocab);
    const Trajectory traj = sample_response(actor, vocab, item->prompt_tokens, temperature,
                                            max_response_len, derive_seed(seed, "ver", r));
    predictions[r] = verification_prediction_from_text(traj.rendered_text);
  });
  return predictions;
}

inline double verification_accuracy(const ActorParams& actor, const Vocabulary& vocab,
                                    std::span<const SolutionRecord> records, double temperature,
                                    const VerificationTemplate& tmpl, std::uint64_t seed,
                                    int max_response_len = 160, int threads = 1) {
  if (records.empty()) return 0.0;
  const std::vector<int> preds = verification_predictions(actor, vocab, records, temperature,
                                                          tmpl, seed, max_response_len, threads);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    hits += preds[r] == normalize_score(records[r].gt_reward);
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

// ---------------------------------------------------------------- evaluate

struct EvalOptions {
  int k = 8;
  double temperature = 1.0;
  VoteConfig vote;
  std::vector<std::string> verification_keywords = kVerificationKeywords;
  std::vector<std::string> reflection_keywords = kReflectionKeywords;
  int max_response_len = 160;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SampleReport {
  std::optional<std::string> answer;  // canonical extracted answer, if boxed
  bool correct = false;
  double gen_reward = 0.0;
  int ver_prediction = 0;  // normalized self-verification score
  int ver_truth = 0;       // normalized outcome-verifier score
  std::string response_text;
};

struct ProblemReport {
  std::string problem_id;
  std::string ground_truth;
  std::vector<SampleReport> samples;
  std::string majority_answer;
  std::string weighted_answer;
  bool majority_correct = false;
  bool weighted_correct = false;
};

struct EvalReport {
  double pass_at_1 = 0.0;
  double verification_accuracy = 0.0;
  double maj_at_k = 0.0;
  double weighted_maj_at_k = 0.0;
  double verification_frequency = 0.0;
  std::optional<double> self_verified_accuracy;
  int k = 0;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::size_t num_problems = 0;
  std::vector<ProblemReport> problems;
};

// Runs all metrics on one shared set of samples: k solutions per problem,
// one self-verification per solution.
inline EvalReport evaluate(const ActorParams& actor, const Vocabulary& vocab,
                           std::span<const Problem> problems, const EvalOptions& opt,
                           const VerificationTemplate& tmpl) {
  if (opt.k < 1) throw std::invalid_argument("evaluate: k must be >= 1");
  opt.vote.validate();
  EvalReport report;
  report.k = opt.k;
  report.temperature = opt.temperature;
  report.seed = opt.seed;
  report.num_problems = problems.size();
  if (problems.empty()) return report;

  // Solution sampling, seeded exactly like pass_at_1.
  const std::size_t n = problems.size() * static_cast<std::size_t>(opt.k);
  std::vector<Trajectory> solutions(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    const std::size_t p = i / static_cast<std::size_t>(opt.k);
    const std::size_t s = i % static_cast<std::size_t>(opt.k);
    const std::vector<int> prompt = render_prompt(vocab, problems[p]);
    solutions[i] = sample_response(actor, vocab, prompt, opt.temperature, opt.max_response_len,
                                   derive_seed(opt.seed, "gen", p, s));
  });

  std::vector<SolutionRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = i / static_cast<std::size_t>(opt.k);
    records[i].statement = problems[p].statement;
    records[i].solution_text = solutions[i].rendered_text;
    records[i].gt_reward = outcome_reward(solutions[i].rendered_text, problems[p].answer);
  }
  const std::vector<int> ver_preds =
      verification_predictions(actor, vocab, records, opt.temperature, tmpl, opt.seed,
                               opt.max_response_len, opt.threads);

  std::size_t pass_hits = 0;
  std::size_t ver_hits = 0;
  std::size_t maj_hits = 0;
  std::size_t weighted_hits = 0;
  std::vector<std::string> gen_texts;
  gen_texts.reserve(n);
  std::vector<TextOutcome> outcomes;
  outcomes.reserve(n);

  for (std::size_t p = 0; p < problems.size(); ++p) {
    ProblemReport pr;
    pr.problem_id = problems[p].id;
    pr.ground_truth = problems[p].answer;
    std::vector<std::string> answers;
    std::vector<ScoredAnswer> scored;
    for (int s = 0; s < opt.k; ++s) {
      const std::size_t i = p * static_cast<std::size_t>(opt.k) + static_cast<std::size_t>(s);
      SampleReport sr;
      sr.gen_reward = reward_value(records[i].gt_reward);
      sr.correct = records[i].gt_reward == OutcomeReward::correct;
      sr.ver_prediction = ver_preds[i];
      sr.ver_truth = normalize_score(records[i].gt_reward);
      sr.response_text = solutions[i].rendered_text;
      if (auto boxed = extract_boxed_answer(solutions[i].rendered_text)) {
        sr.answer = *boxed;
        answers.push_back(*boxed);
        scored.push_back({*boxed, ver_preds[i]});
      }
      pass_hits += sr.correct ? 1 : 0;
      ver_hits += sr.ver_prediction == sr.ver_truth ? 1 : 0;
      gen_texts.push_back(sr.response_text);
      outcomes.push_back({sr.response_text, sr.correct});
      pr.samples.push_back(std::move(sr));
    }
    pr.majority_answer = majority_vote(answers);
    pr.weighted_answer = weighted_majority_vote(scored, opt.vote);
    pr.majority_correct = pr.majority_answer == problems[p].answer;
    pr.weighted_correct = pr.weighted_answer == problems[p].answer;
    maj_hits += pr.majority_correct ? 1 : 0;
    weighted_hits += pr.weighted_correct ? 1 : 0;
    report.problems.push_back(std::move(pr));
  }

  report.pass_at_1 = static_cast<double>(pass_hits) / static_cast<double>(n);
  report.verification_accuracy = static_cast<double>(ver_hits) / static_cast<double>(n);
  report.maj_at_k = static_cast<double>(maj_hits) / static_cast<double>(problems.size());
  report.weighted_maj_at_k =
      static_cast<double>(weighted_hits) / static_cast<double>(problems.size());
  report.verification_frequency = keyword_frequency(gen_texts, opt.verification_keywords);
  report.self_verified_accuracy = self_verified_accuracy(outcomes, opt.verification_keywords);
  return report;
}

// ------------------------------------------------------------- serializers

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["pass_at_1"] = r.pass_at_1;
  j["verification_accuracy"] = r.verification_accuracy;
  j["maj_at_k"] = r.maj_at_k;
  j["weighted_maj_at_k"] = r.weighted_maj_at_k;
  j["verification_frequency"] = r.verification_frequency;
  if (r.self_verified_accuracy) {
    j["self_verified_accuracy"] = *r.self_verified_accuracy;
  } else {
    j["self_verified_accuracy"] = nullptr;
  }
  j["k"] = r.k;
  j["temperature"] = r.temperature;
  j["seed"] = r.seed;
  j["num_problems"] = r.num_problems;
  return j;
}

inline nlohmann::json problem_report_to_json(const ProblemReport& pr) {
  nlohmann::json j;
  j["problem_id"] = pr.problem_id;
  j["ground_truth"] = pr.ground_truth;
  j["majority_answer"] = pr.majority_answer;
  j["weighted_answer"] = pr.weighted_answer;
  j["majority_correct"] = pr.majority_correct;
  j["weighted_correct"] = pr.weighted_correct;
  nlohmann::json samples = nlohmann::json::array();
  for (const SampleReport& s : pr.samples) {
    nlohmann::json js;
    if (s.answer) {
      js["answer"] = *s.answer;
    } else {
      js["answer"] = nullptr;
    }
    js["correct"] = s.correct;
    js["reward"] = s.gen_reward;
    js["ver_prediction"] = s.ver_prediction;
    js["ver_truth"] = s.ver_truth;
    js["response_text"] = s.response_text;
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  return j;
}

// (metric, value) rows for plotting.
inline std::string eval_report_to_csv(const EvalReport& r) {
  std::string csv = "metric,value\n";
  const auto row = [&csv](std::string_view name, double value) {
    csv += std::string(name) + "," + std::to_string(value) + "\n";
  };
  row("pass_at_1", r.pass_at_1);
  row("verification_accuracy", r.verification_accuracy);
  row("maj_at_k", r.maj_at_k);
  row("weighted_maj_at_k", r.weighted_maj_at_k);
  row("verification_frequency", r.verification_frequency);
  if (r.self_verified_accuracy) row("self_verified_accuracy", *r.self_verified_accuracy);
  return csv;
}

}  // namespace rise

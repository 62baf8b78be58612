#include <gtest/gtest.h>

#include <map>
#include <string>
#include <vector>

#include "rise/eval.hpp"
#include "rise/rng.hpp"
#include "rise/tasks.hpp"
#include "rise/trainer.hpp"

namespace {

using namespace rise;

// Brute-force evaluation of the per-group smoothed-weight formula with the
// lexicographic tie rule.
std::string oracle_weighted_vote(const std::vector<ScoredAnswer>& records, double alpha, int d) {
  std::map<std::string, std::pair<int, int>> groups;
  for (const auto& r : records) {
    groups[r.answer].first += 1;
    groups[r.answer].second += r.score;
  }
  std::string best;
  double best_weight = -1.0;
  for (const auto& [answer, g] : groups) {
    const double weight = g.first * (alpha + g.second) / (g.first + alpha * d);
    if (weight > best_weight) {
      best = answer;
      best_weight = weight;
    }
  }
  return best;
}

TEST(MajorityVote, Examples) {
  EXPECT_EQ(majority_vote(std::vector<std::string>{"42", "42", "7"}), "42");
  // Tie broken to the lexicographically smallest canonical answer.
  EXPECT_EQ(majority_vote(std::vector<std::string>{"42", "7"}), "42");
  EXPECT_EQ(majority_vote(std::vector<std::string>{"x"}), "x");
  EXPECT_EQ(majority_vote(std::vector<std::string>{}), "");
}

TEST(WeightedVote, WorkedExample) {
  const std::vector<ScoredAnswer> records = {{"A", 1}, {"A", 0}, {"B", 1}};
  VoteConfig cfg;  // alpha = 2, d = 2
  EXPECT_EQ(weighted_majority_vote(records, cfg), "A");
  // weight(A) = 2 * (2+1)/(2+4) = 1.0, weight(B) = 1 * (2+1)/(1+4) = 0.6
  EXPECT_EQ(oracle_weighted_vote(records, 2.0, 2), "A");
}

TEST(WeightedVote, SingleRecordWinsRegardlessOfScore) {
  VoteConfig cfg;
  EXPECT_EQ(weighted_majority_vote(std::vector<ScoredAnswer>{{"9", 0}}, cfg), "9");
  EXPECT_EQ(weighted_majority_vote(std::vector<ScoredAnswer>{}, cfg), "");
}

TEST(WeightedVote, AlphaZeroUniformScoresReduceToMajority) {
  Rng rng = make_rng(11);
  VoteConfig cfg;
  cfg.alpha = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_below(rng, 12);
    std::vector<ScoredAnswer> records;
    std::vector<std::string> answers;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string a(1, static_cast<char>('0' + uniform_below(rng, 5)));
      records.push_back({a, 1});
      answers.push_back(a);
    }
    ASSERT_EQ(weighted_majority_vote(records, cfg), majority_vote(answers));
  }
}

TEST(WeightedVote, EqualScoresMatchMajorityUnderSmoothing) {
  Rng rng = make_rng(12);
  VoteConfig cfg;  // alpha = 2, d = 2: weight strictly increasing in n
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_below(rng, 12);
    const int shared_score = static_cast<int>(uniform_below(rng, 2));
    std::vector<ScoredAnswer> records;
    std::vector<std::string> answers;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string a(1, static_cast<char>('a' + uniform_below(rng, 4)));
      records.push_back({a, shared_score});
      answers.push_back(a);
    }
    ASSERT_EQ(weighted_majority_vote(records, cfg), majority_vote(answers));
  }
}

TEST(WeightedVote, OracleAgreementOnRandomInstances) {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    VoteConfig cfg;
    cfg.alpha = uniform_range(rng, 0.0, 4.0);
    cfg.d = 1 + static_cast<int>(uniform_below(rng, 4));
    const std::size_t n = 1 + uniform_below(rng, 16);
    std::vector<ScoredAnswer> records;
    for (std::size_t i = 0; i < n; ++i) {
      records.push_back({std::string(1, static_cast<char>('0' + uniform_below(rng, 6))),
                         static_cast<int>(uniform_below(rng, 2))});
    }
    ASSERT_EQ(weighted_majority_vote(records, cfg),
              oracle_weighted_vote(records, cfg.alpha, cfg.d));
  }
}

TEST(WeightedVote, AddingWinnerDuplicateKeepsWinner) {
  Rng rng = make_rng(14);
  VoteConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_below(rng, 10);
    std::vector<ScoredAnswer> records;
    for (std::size_t i = 0; i < n; ++i) {
      records.push_back({std::string(1, static_cast<char>('0' + uniform_below(rng, 4))),
                         static_cast<int>(uniform_below(rng, 2))});
    }
    const std::string winner = weighted_majority_vote(records, cfg);
    records.push_back({winner, 1});
    ASSERT_EQ(weighted_majority_vote(records, cfg), winner);
  }
}

TEST(WeightedVote, AllNScoreSumCollapsesToMajority) {
  VoteConfig cfg;
  cfg.score_sum_over_all = true;
  const std::vector<ScoredAnswer> records = {{"A", 1}, {"A", 0}, {"B", 1}};
  EXPECT_EQ(weighted_majority_vote(records, cfg), "A");
  // Even when B holds all the score mass, frequency decides.
  const std::vector<ScoredAnswer> skewed = {{"A", 0}, {"A", 0}, {"B", 1}};
  EXPECT_EQ(weighted_majority_vote(skewed, cfg), "A");
}

TEST(KeywordFrequency, Examples) {
  const std::vector<std::string> texts = {"To verify: sums match.", "done"};
  EXPECT_DOUBLE_EQ(keyword_frequency(texts, kVerificationKeywords), 0.5);
  EXPECT_DOUBLE_EQ(keyword_frequency(texts, std::vector<std::string>{}), 0.0);
  const std::vector<std::string> mixed_case = {"Let me Re-Evaluate the sum."};
  EXPECT_DOUBLE_EQ(keyword_frequency(mixed_case, kVerificationKeywords), 1.0);
  EXPECT_DOUBLE_EQ(keyword_frequency(std::vector<std::string>{}, kVerificationKeywords), 0.0);
}

TEST(SelfVerifiedAccuracy, Examples) {
  const std::vector<TextOutcome> records = {{"let me verify this", true},
                                            {"plain answer", false}};
  const auto acc = self_verified_accuracy(records, kVerificationKeywords);
  ASSERT_TRUE(acc.has_value());
  EXPECT_DOUBLE_EQ(*acc, 1.0);

  const std::vector<TextOutcome> none = {{"plain", true}};
  EXPECT_FALSE(self_verified_accuracy(none, kVerificationKeywords).has_value());

  const std::vector<TextOutcome> three = {{"verify a", true},
                                          {"recheck b", true},
                                          {"validate c", false},
                                          {"unrelated", true}};
  EXPECT_NEAR(*self_verified_accuracy(three, kVerificationKeywords), 2.0 / 3.0, 1e-12);
}

std::vector<Problem> fixed_problems() {
  std::vector<Problem> problems(2);
  problems[0] = {"p0", "Compute (3+5) mod 7.", "1"};
  problems[1] = {"p1", "Compute (2+2) mod 7.", "4"};
  return problems;
}

TEST(PassAt1, ScriptedPolicies) {
  const auto problems = fixed_problems();
  // Perfect policy: always emits the boxed ground truth.
  const auto perfect = [&](std::size_t p, std::size_t) {
    return "reasoning \\boxed{" + problems[p].answer + "}</s>";
  };
  EXPECT_DOUBLE_EQ(pass_at_1_with_sampler(problems, 8, perfect), 1.0);

  // A policy that never boxes scores zero.
  const auto unboxed = [&](std::size_t, std::size_t) { return std::string("the answer is 1"); };
  EXPECT_DOUBLE_EQ(pass_at_1_with_sampler(problems, 8, unboxed), 0.0);

  // Correctness pattern [1,0],[0,0] with k=2 -> 0.25.
  const auto patterned = [&](std::size_t p, std::size_t s) {
    if (p == 0 && s == 0) return "\\boxed{" + problems[p].answer + "}";
    return std::string("\\boxed{999}");
  };
  EXPECT_DOUBLE_EQ(pass_at_1_with_sampler(problems, 2, patterned), 0.25);
}

TEST(VerificationAccuracy, NormalizedComparison) {
  std::vector<SolutionRecord> records(3);
  records[0] = {"q0", "\\boxed{1}", OutcomeReward::correct};
  records[1] = {"q1", "\\boxed{9}", OutcomeReward::boxed_mismatch};
  records[2] = {"q2", "none", OutcomeReward::unboxed};

  // A verifier that always answers the exact true score.
  std::vector<std::string> exact = {"\\boxed{1}", "\\boxed{-0.5}", "\\boxed{-1}"};
  EXPECT_DOUBLE_EQ(verification_accuracy_from_texts(records, exact), 1.0);

  // Target 1 predicted -0.5 counts incorrect (1 vs 0 after normalization).
  std::vector<std::string> wrong_on_first = {"\\boxed{-0.5}", "\\boxed{-0.5}", "\\boxed{-1}"};
  EXPECT_NEAR(verification_accuracy_from_texts(records, wrong_on_first), 2.0 / 3.0, 1e-12);

  // Target -0.5 predicted -1 counts correct: both normalize to 0.
  std::vector<std::string> ternary_off = {"\\boxed{1}", "\\boxed{-1}", "\\boxed{-0.5}"};
  EXPECT_DOUBLE_EQ(verification_accuracy_from_texts(records, ternary_off), 1.0);

  // Metamorphic: accuracy equals direct comparison of normalized pairs.
  Rng rng = make_rng(15);
  const std::vector<std::string> texts = {"\\boxed{1}", "\\boxed{-0.5}", "\\boxed{-1}",
                                          "\\boxed{2}", "gibberish"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<SolutionRecord> rs(1 + uniform_below(rng, 6));
    std::vector<std::string> vs(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
      rs[i].statement = "q";
      rs[i].solution_text = "s";
      rs[i].gt_reward = std::array{OutcomeReward::correct, OutcomeReward::boxed_mismatch,
                                   OutcomeReward::unboxed}[uniform_below(rng, 3)];
      vs[i] = texts[uniform_below(rng, texts.size())];
    }
    double direct = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      direct += verification_prediction_from_text(vs[i]) == normalize_score(rs[i].gt_reward);
    }
    direct /= static_cast<double>(rs.size());
    ASSERT_DOUBLE_EQ(verification_accuracy_from_texts(rs, vs), direct);
  }
}

struct EvalFixture {
  Vocabulary vocab;
  VerificationTemplate tmpl = VerificationTemplate::builtin();
  ActorParams actor;
  std::vector<Problem> problems;
  EvalOptions opt;

  EvalFixture() {
    NetConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = 4;
    cfg.window = 12;
    cfg.hidden = 8;
    actor = init_actor(cfg, 21);
    TaskSpec spec;
    spec.kind = TaskKind::mod_add;
    spec.modulus = 7;
    spec.seed = 3;
    problems = generate_problems(spec, 4);
    opt.k = 4;
    opt.max_response_len = 10;
    opt.seed = 17;
  }
};

TEST(Evaluate, RatesWithinBoundsAndEchoesSettings) {
  EvalFixture f;
  const EvalReport report = evaluate(f.actor, f.vocab, f.problems, f.opt, f.tmpl);
  EXPECT_EQ(report.k, 4);
  EXPECT_DOUBLE_EQ(report.temperature, 1.0);
  EXPECT_EQ(report.num_problems, 4u);
  for (double rate : {report.pass_at_1, report.verification_accuracy, report.maj_at_k,
                      report.weighted_maj_at_k, report.verification_frequency}) {
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
  }
  ASSERT_EQ(report.problems.size(), 4u);
  for (const ProblemReport& pr : report.problems) {
    EXPECT_EQ(pr.samples.size(), 4u);
  }
}

TEST(Evaluate, DeterministicAcrossRunsAndThreads) {
  EvalFixture f;
  const EvalReport a = evaluate(f.actor, f.vocab, f.problems, f.opt, f.tmpl);
  const EvalReport b = evaluate(f.actor, f.vocab, f.problems, f.opt, f.tmpl);
  EXPECT_EQ(eval_report_to_json(a).dump(), eval_report_to_json(b).dump());
  EvalOptions threaded = f.opt;
  threaded.threads = 3;
  const EvalReport c = evaluate(f.actor, f.vocab, f.problems, threaded, f.tmpl);
  EXPECT_EQ(eval_report_to_json(a).dump(), eval_report_to_json(c).dump());
}

// Changing k changes the sample count but not the per-sample scoring rule:
// k=4 samples are a prefix of k=8 samples.
TEST(Evaluate, SampleSeedsArePrefixStableInK) {
  EvalFixture f;
  EvalOptions small = f.opt;
  small.k = 4;
  EvalOptions big = f.opt;
  big.k = 8;
  const EvalReport a = evaluate(f.actor, f.vocab, f.problems, small, f.tmpl);
  const EvalReport b = evaluate(f.actor, f.vocab, f.problems, big, f.tmpl);
  for (std::size_t p = 0; p < a.problems.size(); ++p) {
    for (int s = 0; s < 4; ++s) {
      ASSERT_EQ(a.problems[p].samples[static_cast<std::size_t>(s)].response_text,
                b.problems[p].samples[static_cast<std::size_t>(s)].response_text);
      ASSERT_EQ(a.problems[p].samples[static_cast<std::size_t>(s)].correct,
                b.problems[p].samples[static_cast<std::size_t>(s)].correct);
    }
  }
}

TEST(Evaluate, PassAt1MatchesStandaloneOp) {
  EvalFixture f;
  const EvalReport report = evaluate(f.actor, f.vocab, f.problems, f.opt, f.tmpl);
  const double standalone = pass_at_1(f.actor, f.vocab, f.problems, f.opt.k, f.opt.temperature,
                                      f.opt.seed, f.opt.max_response_len);
  EXPECT_DOUBLE_EQ(report.pass_at_1, standalone);
}

TEST(Evaluate, CsvEmitterContainsAllMetrics) {
  EvalFixture f;
  const EvalReport report = evaluate(f.actor, f.vocab, f.problems, f.opt, f.tmpl);
  const std::string csv = eval_report_to_csv(report);
  EXPECT_NE(csv.find("metric,value"), std::string::npos);
  EXPECT_NE(csv.find("pass_at_1,"), std::string::npos);
  EXPECT_NE(csv.find("weighted_maj_at_k,"), std::string::npos);
}

}  // namespace

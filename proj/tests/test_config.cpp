#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "rise/config.hpp"

namespace {

using namespace rise;

TEST(Config, DefaultsResolveAndValidate) {
  const ExperimentConfig cfg = resolve_config(ExperimentConfig{});
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_FALSE(cfg.out_dir.empty());
  EXPECT_EQ(cfg.trainer.verification_rollouts, cfg.trainer.rollouts_per_problem);
  EXPECT_EQ(cfg.trainer.verification_batch_size, 32);  // 12.5% of 256
  EXPECT_DOUBLE_EQ(cfg.rl.kl_coeff, 0.0);
  EXPECT_DOUBLE_EQ(cfg.rl.actor_lr, 12.0);
  EXPECT_DOUBLE_EQ(cfg.rl.critic_lr, 0.18);
}

TEST(Config, RoundTripFixedPoint) {
  const ExperimentConfig resolved = resolve_config(ExperimentConfig{});
  const std::string emitted = emit_config(resolved);
  const ExperimentConfig reparsed = resolve_config(parse_config(emitted));
  EXPECT_EQ(emit_config(reparsed), emitted);
}

TEST(Config, UnknownKeysAllReported) {
  const std::string text = R"(
[run]
seed = 7
typo_key = 1

[trainer]
another_typo = 2
train_batch_size = 8
)";
  try {
    parse_config(text);
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run.typo_key"), std::string::npos);
    EXPECT_NE(msg.find("trainer.another_typo"), std::string::npos);
  }
}

TEST(Config, UnknownSectionReported) {
  EXPECT_THROW(parse_config("[nonsense]\nfoo = 1\n"), config_error);
}

TEST(Config, BadValuesAllReported) {
  ExperimentConfig cfg;
  cfg.modulus = 1;
  cfg.rl.lam = 1.5;
  cfg.trainer.temperature = 0.0;
  try {
    resolve_config(cfg);
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("modulus"), std::string::npos);
    EXPECT_NE(msg.find("lam"), std::string::npos);
    EXPECT_NE(msg.find("temperature"), std::string::npos);
  }
}

TEST(Config, ZeroRlForcesEmptyVerificationBatch) {
  ExperimentConfig cfg;
  cfg.zero_rl = true;
  cfg.trainer.verification_batch_size = 32;
  const ExperimentConfig resolved = resolve_config(cfg);
  EXPECT_EQ(resolved.trainer.verification_batch_size, 0);
}

TEST(Config, OfflineVerificationNeedsNonZeroBatch) {
  ExperimentConfig cfg;
  cfg.offline_verification = "responses.jsonl";
  cfg.trainer.verification_batch_size = 0;
  EXPECT_THROW(resolve_config(cfg), config_error);

  ExperimentConfig both;
  both.zero_rl = true;
  both.offline_verification = "responses.jsonl";
  EXPECT_THROW(resolve_config(both), config_error);
}

TEST(Config, KeywordListsParseAndLowercase) {
  const std::string text = "[eval]\nverification_keywords = Verify, RECHECK , validate\n";
  const ExperimentConfig cfg = parse_config(text);
  ASSERT_EQ(cfg.verification_keywords.size(), 3u);
  EXPECT_EQ(cfg.verification_keywords[0], "verify");
  EXPECT_EQ(cfg.verification_keywords[1], "recheck");
  EXPECT_EQ(cfg.verification_keywords[2], "validate");
}

TEST(Config, MalformedLinesReported) {
  EXPECT_THROW(parse_config("[run\nseed = 1\n"), config_error);
  EXPECT_THROW(parse_config("[run]\nno equals sign here\n"), config_error);
  EXPECT_THROW(parse_config("orphan = 1\n"), config_error);
  EXPECT_THROW(parse_config("[run]\nseed = notanumber\n"), config_error);
}

TEST(Config, CommentsAndBlankLinesIgnored) {
  const std::string text = R"(
# full line comment
; alternative comment

[run]
seed = 9
)";
  EXPECT_EQ(parse_config(text).seed, 9u);
}

TEST(Config, MissingFileNamesPath) {
  try {
    parse_config_file("/definitely/missing/rise.conf");
    FAIL() << "expected io_error";
  } catch (const io_error& e) {
    EXPECT_NE(std::string(e.what()).find("/definitely/missing/rise.conf"), std::string::npos);
  }
}

TEST(Config, NumProblemsMustCoverBatch) {
  ExperimentConfig cfg;
  cfg.num_problems = 10;  // < train_batch_size 256
  EXPECT_THROW(resolve_config(cfg), config_error);
}

}  // namespace

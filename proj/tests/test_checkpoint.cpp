#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rise/checkpoint.hpp"
#include "rise/policy.hpp"
#include "rise/vocab.hpp"

namespace {

using namespace rise;

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("rise-ckpt-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter_++));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
  static int counter_;
};

int CheckpointTest::counter_ = 0;

Checkpoint make_checkpoint(bool trainer_state) {
  Vocabulary vocab;
  NetConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 4;
  cfg.window = 8;
  cfg.hidden = 8;
  Checkpoint ckpt;
  ckpt.actor = init_actor(cfg, 1);
  ckpt.critic = init_critic(cfg, 2);
  if (trainer_state) {
    ckpt.has_trainer_state = true;
    ckpt.ref_actor = init_actor(cfg, 3);
    ckpt.trainer_seed = 777;
    ckpt.next_iteration = 12;
  }
  return ckpt;
}

TEST_F(CheckpointTest, RoundTripBitExact) {
  const Checkpoint ckpt = make_checkpoint(true);
  const auto path = dir_ / "a.rise";
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.actor.flat, ckpt.actor.flat);
  EXPECT_EQ(loaded.critic.flat, ckpt.critic.flat);
  EXPECT_TRUE(loaded.has_trainer_state);
  EXPECT_EQ(loaded.ref_actor.flat, ckpt.ref_actor.flat);
  EXPECT_EQ(loaded.trainer_seed, 777u);
  EXPECT_EQ(loaded.next_iteration, 12u);
  EXPECT_EQ(params_checksum(loaded.actor), params_checksum(ckpt.actor));
}

TEST_F(CheckpointTest, RoundTripWithoutTrainerState) {
  const Checkpoint ckpt = make_checkpoint(false);
  const auto path = dir_ / "b.rise";
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_FALSE(loaded.has_trainer_state);
  EXPECT_EQ(loaded.actor.flat, ckpt.actor.flat);
}

TEST_F(CheckpointTest, RejectsBadMagic) {
  const auto path = dir_ / "c.rise";
  std::ofstream(path) << "definitely not a checkpoint";
  EXPECT_THROW(load_checkpoint(path), io_error);
}

TEST_F(CheckpointTest, RejectsCorruptedHeader) {
  const Checkpoint ckpt = make_checkpoint(false);
  const auto path = dir_ / "d.rise";
  save_checkpoint(path, ckpt);
  // Flip one architecture byte behind the stored checksum.
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(18);
  char byte = 0x7f;
  f.write(&byte, 1);
  f.close();
  EXPECT_THROW(load_checkpoint(path), io_error);
}

TEST_F(CheckpointTest, RejectsTruncatedPayload) {
  const Checkpoint ckpt = make_checkpoint(false);
  const auto path = dir_ / "e.rise";
  save_checkpoint(path, ckpt);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 64);
  EXPECT_THROW(load_checkpoint(path), io_error);
}

TEST_F(CheckpointTest, MissingFile) {
  EXPECT_THROW(load_checkpoint(dir_ / "nope.rise"), io_error);
}

TEST(RequireSameArch, NamesBothShapes) {
  NetConfig a;
  a.vocab_size = 96;
  a.embed_dim = 8;
  a.window = 96;
  a.hidden = 48;
  NetConfig b = a;
  b.hidden = 32;
  try {
    require_same_arch(a, b, "eval");
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("hidden=48"), std::string::npos);
    EXPECT_NE(msg.find("hidden=32"), std::string::npos);
  }
  EXPECT_NO_THROW(require_same_arch(a, a, "eval"));
}

}  // namespace

#pragma once

// The per-iteration training loop:
//   1. sample k solutions per problem from the actor snapshot (batch G),
//   2. turn a seeded sample of G's triples into verification prompts whose
//      target score is the reused generation reward, and roll out K
//      verification responses per prompt (batch V),
//   3. score everything with the outcome verifier, estimate advantages per
//      trajectory, then run shuffled minibatch updates of actor and critic
//      over B = G u V.
//
// Randomness: every stream is derived from (trainer seed, purpose tag,
// iteration, index), so the presence or absence of one consumer (e.g. an
// empty verification batch) never shifts another stream, and a fixed seed
// reproduces parameter trajectories bit for bit at any thread count.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rise/checkpoint.hpp"
#include "rise/policy.hpp"
#include "rise/rl.hpp"
#include "rise/rng.hpp"
#include "rise/tasks.hpp"
#include "rise/util.hpp"
#include "rise/verifier.hpp"
#include "rise/vocab.hpp"

namespace rise {

struct TrainerConfig {
  int train_batch_size = 256;
  int minibatch_size = 32;
  int rollouts_per_problem = 8;     // k
  int verification_batch_size = 32; // desk default keeps the 12.5% ratio
  int verification_rollouts = 0;    // K; 0 means "same as k"
  int max_response_len = 160;
  int max_prompt_len = 4096;
  int epochs = 12;
  double temperature = 1.0;
  int checkpoint_every = 10;
  int threads = 1;
  std::uint64_t seed = 0;

  int resolved_verification_rollouts() const {
    return verification_rollouts > 0 ? verification_rollouts : rollouts_per_problem;
  }

  void validate() const {
    if (train_batch_size < 1) throw config_error("trainer: train_batch_size must be >= 1");
    if (minibatch_size < 1) throw config_error("trainer: minibatch_size must be >= 1");
    if (rollouts_per_problem < 1) throw config_error("trainer: rollouts_per_problem must be >= 1");
    if (verification_batch_size < 0) {
      throw config_error("trainer: verification_batch_size must be >= 0");
    }
    if (verification_batch_size > train_batch_size * rollouts_per_problem) {
      throw config_error("trainer: verification_batch_size exceeds generation batch size");
    }
    if (verification_rollouts < 0) throw config_error("trainer: verification_rollouts must be >= 0");
    if (max_response_len < 1) throw config_error("trainer: max_response_len must be >= 1");
    if (max_prompt_len < 1) throw config_error("trainer: max_prompt_len must be >= 1");
    if (epochs < 1) throw config_error("trainer: epochs must be >= 1");
    if (!(temperature > 0.0)) throw config_error("trainer: temperature must be positive");
    if (checkpoint_every < 0) throw config_error("trainer: checkpoint_every must be >= 0");
    if (threads < 1) throw config_error("trainer: threads must be >= 1");
  }
};

struct TrainState {
  ActorParams actor;
  CriticParams critic;
  ActorParams ref_actor;  // immutable snapshot of the initial policy
  std::uint64_t trainer_seed = 0;
  std::uint64_t next_iteration = 0;
};

inline TrainState make_train_state(const NetConfig& model, std::uint64_t trainer_seed) {
  TrainState state;
  state.actor = init_actor(model, derive_seed(trainer_seed, "init-actor"));
  state.critic = init_critic(model, derive_seed(trainer_seed, "init-critic"));
  state.ref_actor = state.actor;
  state.trainer_seed = trainer_seed;
  return state;
}

struct IterationBatch {
  std::vector<Trajectory> generation;
  std::vector<VerificationItem> items;
  std::vector<Trajectory> verification;  // items[j / K] is the source of trajectory j
  std::uint64_t iteration_index = 0;
};

struct IterationMetrics {
  std::uint64_t iteration = 0;
  double mean_gen_reward = 0.0;
  std::optional<double> mean_ver_reward;  // absent when V is empty
  double actor_objective = 0.0;
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
  double wall_ms = 0.0;
};

inline nlohmann::json metrics_to_json(const IterationMetrics& m) {
  nlohmann::json j;
  j["iteration"] = m.iteration;
  j["mean_gen_reward"] = m.mean_gen_reward;
  if (m.mean_ver_reward) {
    j["mean_ver_reward"] = *m.mean_ver_reward;
  } else {
    j["mean_ver_reward"] = nullptr;
  }
  j["actor_objective"] = m.actor_objective;
  j["critic_loss"] = m.critic_loss;
  j["clip_fraction"] = m.clip_fraction;
  j["wall_ms"] = m.wall_ms;
  return j;
}

// Offline verification source: solution records from a frozen policy.
struct OfflineRecord {
  std::string problem_id;
  std::string statement;
  std::string response_text;
  OutcomeReward reward = OutcomeReward::unboxed;
};

inline std::vector<OfflineRecord> load_offline_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open offline verification file: " + path.string());
  std::vector<OfflineRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      OfflineRecord r;
      r.problem_id = j.at("problem_id").get<std::string>();
      r.statement = j.at("statement").get<std::string>();
      r.response_text = j.at("response_text").get<std::string>();
      const auto reward = reward_from_value(j.at("reward").get<double>());
      if (!reward) throw io_error("reward must be one of {1, -0.5, -1}");
      r.reward = *reward;
      records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw io_error(path.string() + ":" + std::to_string(lineno) +
                     ": bad offline record: " + e.what());
    }
  }
  if (records.empty()) throw io_error("offline verification file has no records: " + path.string());
  return records;
}

// ------------------------------------------------------------- rollouts

// k trajectories per problem against the current actor snapshot, scored
// with the outcome verifier; values are recorded against the critic
// snapshot for GAE and value clipping.
inline std::vector<Trajectory> build_generation_batch(const TrainState& state,
                                                      std::span<const Problem> problems,
                                                      const TrainerConfig& cfg,
                                                      const Vocabulary& vocab) {
  if (problems.empty()) throw std::invalid_argument("build_generation_batch: no problems");
  const int k = cfg.rollouts_per_problem;
  const std::size_t n = problems.size() * static_cast<std::size_t>(k);
  std::vector<Trajectory> batch(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const Problem& problem = problems[i / static_cast<std::size_t>(k)];
    const std::vector<int> prompt = render_prompt(vocab, problem);
    Trajectory traj = sample_response(state.actor, vocab, prompt, cfg.temperature,
                                      cfg.max_response_len,
                                      derive_seed(state.trainer_seed, "gen", state.next_iteration, i),
                                      cfg.max_prompt_len);
    traj.problem_id = problem.id;
    traj.tag = TaskTag::gen;
    traj.values = values(state.critic, vocab, traj.prompt_tokens, traj.response_tokens);
    traj.reward = outcome_reward(traj.rendered_text, problem.answer);
    batch[i] = std::move(traj);
  });
  return batch;
}

namespace detail {

// Samples K verification responses per item from the current snapshot.
inline std::vector<Trajectory> rollout_verification(const TrainState& state,
                                                    std::span<const VerificationItem> items,
                                                    const TrainerConfig& cfg,
                                                    const Vocabulary& vocab) {
  const int K = cfg.resolved_verification_rollouts();
  std::vector<Trajectory> batch(items.size() * static_cast<std::size_t>(K));
  parallel_for(batch.size(), cfg.threads, [&](std::size_t j) {
    const VerificationItem& item = items[j / static_cast<std::size_t>(K)];
    Trajectory traj = sample_response(state.actor, vocab, item.prompt_tokens, cfg.temperature,
                                      cfg.max_response_len,
                                      derive_seed(state.trainer_seed, "ver", state.next_iteration, j),
                                      cfg.max_prompt_len);
    traj.problem_id = item.source_problem_id;
    traj.tag = TaskTag::ver;
    traj.values = values(state.critic, vocab, traj.prompt_tokens, traj.response_tokens);
    traj.reward = verification_reward(traj.rendered_text, item.target_score);
    batch[j] = std::move(traj);
  });
  return batch;
}

}  // namespace detail

// Online verification batch: a uniform without-replacement sample of this
// iteration's generation triples, templated into verification prompts with
// the generation reward reused as the target. Oversized prompts are
// skipped with a warning; if everything is skipped the iteration proceeds
// generation-only.
inline std::pair<std::vector<VerificationItem>, std::vector<Trajectory>> build_verification_batch(
    std::span<const Trajectory> generation, std::span<const Problem> problems,
    const TrainState& state, const TrainerConfig& cfg, const Vocabulary& vocab,
    const VerificationTemplate& tmpl) {
  std::pair<std::vector<VerificationItem>, std::vector<Trajectory>> result;
  if (generation.empty()) throw std::invalid_argument("build_verification_batch: empty generation");
  if (cfg.verification_batch_size == 0) return result;

  const std::size_t count =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.verification_batch_size), generation.size());
  Rng pick_rng = make_rng(derive_seed(state.trainer_seed, "ver-pick", state.next_iteration));
  const std::vector<std::size_t> picks =
      sample_without_replacement(generation.size(), count, pick_rng);

  const int k = cfg.rollouts_per_problem;
  std::size_t skipped = 0;
  for (std::size_t pick : picks) {
    const Trajectory& src = generation[pick];
    const Problem& problem = problems[pick / static_cast<std::size_t>(k)];
    auto item = build_verification_item(problem, src.rendered_text, src.reward, tmpl, vocab,
                                        static_cast<int>(pick), cfg.max_prompt_len);
    if (!item) {
      ++skipped;
      continue;
    }
    result.first.push_back(std::move(*item));
  }
  if (skipped > 0) {
    std::cerr << "[rise] warning: skipped " << skipped
              << " oversized verification prompt(s) in iteration " << state.next_iteration
              << (result.first.empty() ? "; proceeding generation-only" : "") << "\n";
  }
  result.second = detail::rollout_verification(state, result.first, cfg, vocab);
  return result;
}

// Offline ablation: items come from a frozen policy's solution records
// instead of this iteration's generation batch; targets reuse the stored
// rewards. Verification responses are still sampled from the live actor.
inline std::pair<std::vector<VerificationItem>, std::vector<Trajectory>>
build_verification_batch_offline(std::span<const OfflineRecord> records, const TrainState& state,
                                 const TrainerConfig& cfg, const Vocabulary& vocab,
                                 const VerificationTemplate& tmpl) {
  std::pair<std::vector<VerificationItem>, std::vector<Trajectory>> result;
  if (records.empty() || cfg.verification_batch_size == 0) return result;
  const std::size_t count =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.verification_batch_size), records.size());
  Rng pick_rng = make_rng(derive_seed(state.trainer_seed, "ver-pick", state.next_iteration));
  const std::vector<std::size_t> picks = sample_without_replacement(records.size(), count, pick_rng);

  std::size_t skipped = 0;
  for (std::size_t pick : picks) {
    const OfflineRecord& rec = records[pick];
    Problem synth;
    synth.id = rec.problem_id;
    synth.statement = rec.statement;
    auto item = build_verification_item(synth, rec.response_text, rec.reward, tmpl, vocab,
                                        -1, cfg.max_prompt_len);
    if (!item) {
      ++skipped;
      continue;
    }
    result.first.push_back(std::move(*item));
  }
  if (skipped > 0) {
    std::cerr << "[rise] warning: skipped " << skipped
              << " oversized offline verification prompt(s) in iteration "
              << state.next_iteration << "\n";
  }
  result.second = detail::rollout_verification(state, result.first, cfg, vocab);
  return result;
}

// ------------------------------------------------------------ SGD update

namespace detail {

struct MinibatchScratch {
  std::vector<std::vector<double>> actor_grads;
  std::vector<std::vector<double>> critic_grads;
  std::vector<TrajectoryCache> actor_caches;
  std::vector<TrajectoryCache> critic_caches;
};

inline void dump_diagnostics(const Trajectory& traj, const AdvantageEstimate& est,
                             std::uint64_t iteration, std::size_t minibatch_index) {
  std::cerr << "[rise] diagnostic dump: iteration " << iteration << ", minibatch "
            << minibatch_index << ", problem " << traj.problem_id << ", tag "
            << (traj.tag == TaskTag::gen ? "GEN" : "VER") << ", T=" << traj.response_tokens.size()
            << ", reward=" << reward_value(traj.reward) << "\n  advantages:";
  for (double a : est.advantages) std::cerr << ' ' << a;
  std::cerr << "\n  old_logprobs:";
  for (double l : traj.old_logprobs) std::cerr << ' ' << l;
  std::cerr << '\n';
}

}  // namespace detail

// One full RL step over a problem batch. Returns the iteration metrics and,
// if `out_batch` is given, the rollout batch for auditing.
inline IterationMetrics run_iteration(TrainState& state, std::span<const Problem> problems,
                                      const TrainerConfig& cfg, const RLConfig& rl,
                                      const Vocabulary& vocab, const VerificationTemplate& tmpl,
                                      std::span<const OfflineRecord> offline_records = {},
                                      bool offline_mode = false,
                                      IterationBatch* out_batch = nullptr) {
  cfg.validate();
  rl.validate();
  const auto t0 = std::chrono::steady_clock::now();

  IterationBatch batch;
  batch.iteration_index = state.next_iteration;
  batch.generation = build_generation_batch(state, problems, cfg, vocab);
  if (offline_mode) {
    auto [items, ver] = build_verification_batch_offline(offline_records, state, cfg, vocab, tmpl);
    batch.items = std::move(items);
    batch.verification = std::move(ver);
  } else {
    auto [items, ver] = build_verification_batch(batch.generation, problems, state, cfg, vocab, tmpl);
    batch.items = std::move(items);
    batch.verification = std::move(ver);
  }

  // B = G u V, advantages estimated independently per trajectory.
  std::vector<const Trajectory*> combined;
  combined.reserve(batch.generation.size() + batch.verification.size());
  for (const Trajectory& t : batch.generation) combined.push_back(&t);
  for (const Trajectory& t : batch.verification) combined.push_back(&t);

  std::vector<AdvantageEstimate> estimates(combined.size());
  parallel_for(combined.size(), cfg.threads, [&](std::size_t i) {
    const Trajectory& traj = *combined[i];
    const std::vector<double> rewards =
        terminal_reward_vector(traj.reward, static_cast<int>(traj.response_tokens.size()));
    estimates[i] = gae(rewards, traj.values, rl.gamma, rl.lam);
  });

  Rng shuffle_rng = make_rng(derive_seed(state.trainer_seed, "shuffle", state.next_iteration));
  const std::vector<std::size_t> order = shuffled_indices(combined.size(), shuffle_rng);

  const std::size_t param_count_actor = state.actor.param_count();
  const std::size_t param_count_critic = state.critic.param_count();
  detail::MinibatchScratch scratch;
  scratch.actor_grads.resize(static_cast<std::size_t>(cfg.minibatch_size));
  scratch.critic_grads.resize(static_cast<std::size_t>(cfg.minibatch_size));
  scratch.actor_caches.resize(static_cast<std::size_t>(cfg.minibatch_size));
  scratch.critic_caches.resize(static_cast<std::size_t>(cfg.minibatch_size));

  std::vector<double> actor_step(param_count_actor);
  std::vector<double> critic_step(param_count_critic);

  double objective_sum = 0.0;
  double loss_sum = 0.0;
  double clip_sum = 0.0;
  std::size_t minibatch_index = 0;

  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(cfg.minibatch_size), ++minibatch_index) {
    const std::size_t end =
        std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
    const std::size_t m = end - start;

    std::vector<double> objectives(m), losses(m), clips(m);
    parallel_for(m, cfg.threads, [&](std::size_t slot) {
      const std::size_t idx = order[start + slot];
      const Trajectory& traj = *combined[idx];
      const AdvantageEstimate& est = estimates[idx];

      auto& ag = scratch.actor_grads[slot];
      auto& cg = scratch.critic_grads[slot];
      ag.assign(param_count_actor, 0.0);
      cg.assign(param_count_critic, 0.0);

      // One forward per net; scores and backprop share the cached
      // activations, bit-identical to composing the public ops.
      TrajectoryCache& acache = scratch.actor_caches[slot];
      forward_trajectory(state.actor, traj.prompt_tokens, traj.response_tokens, acache);
      const std::vector<double> new_lp =
          rise::detail::logprobs_from_cache(state.actor, acache, traj.response_tokens);
      std::vector<double> ref_lp;
      if (rl.kl_coeff != 0.0) {
        ref_lp = logprobs(state.ref_actor, vocab, traj.prompt_tokens, traj.response_tokens);
      }
      const ActorObjective actor_obj =
          ppo_actor_objective(new_lp, traj.old_logprobs, est.advantages, ref_lp, rl);
      const std::vector<double> dout = rise::detail::actor_dout_from_cache(
          state.actor, acache, traj.response_tokens, actor_obj.grad_weights);
      backward_trajectory(state.actor, acache, dout, ag);

      TrajectoryCache& ccache = scratch.critic_caches[slot];
      forward_trajectory(state.critic, traj.prompt_tokens, traj.response_tokens, ccache);
      const std::vector<double> new_v(ccache.out.begin(), ccache.out.end());
      const CriticObjective critic_obj =
          critic_objective(new_v, traj.values, est.value_targets, rl.value_clip);
      backward_trajectory(state.critic, ccache, critic_obj.grad_weights, cg);

      objectives[slot] = actor_obj.objective;
      losses[slot] = critic_obj.loss;
      clips[slot] = actor_obj.clip_fraction;
    });

    for (std::size_t slot = 0; slot < m; ++slot) {
      if (!std::isfinite(objectives[slot]) || !std::isfinite(losses[slot])) {
        const std::size_t idx = order[start + slot];
        detail::dump_diagnostics(*combined[idx], estimates[idx], state.next_iteration,
                                 minibatch_index);
        throw std::runtime_error("run_iteration: non-finite loss in iteration " +
                                 std::to_string(state.next_iteration));
      }
      objective_sum += objectives[slot];
      loss_sum += losses[slot];
      clip_sum += clips[slot];
    }

    // Reduce per-trajectory gradients in slot order (thread-count
    // independent), then apply: ascent on the PPO objective, descent on
    // the critic loss. Means are over the minibatch's trajectories.
    std::fill(actor_step.begin(), actor_step.end(), 0.0);
    std::fill(critic_step.begin(), critic_step.end(), 0.0);
    for (std::size_t slot = 0; slot < m; ++slot) {
      detail::axpy(1.0, scratch.actor_grads[slot].data(), actor_step.data(),
                   static_cast<int>(param_count_actor));
      detail::axpy(1.0, scratch.critic_grads[slot].data(), critic_step.data(),
                   static_cast<int>(param_count_critic));
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    apply_gradient(state.actor, actor_step, rl.actor_lr * inv_m);
    apply_gradient(state.critic, critic_step, -rl.critic_lr * inv_m);
  }

  IterationMetrics metrics;
  metrics.iteration = state.next_iteration;
  double gen_sum = 0.0;
  for (const Trajectory& t : batch.generation) gen_sum += reward_value(t.reward);
  metrics.mean_gen_reward = gen_sum / static_cast<double>(batch.generation.size());
  if (!batch.verification.empty()) {
    double ver_sum = 0.0;
    for (const Trajectory& t : batch.verification) ver_sum += reward_value(t.reward);
    metrics.mean_ver_reward = ver_sum / static_cast<double>(batch.verification.size());
  }
  const double n_traj = static_cast<double>(combined.size());
  metrics.actor_objective = objective_sum / n_traj;
  metrics.critic_loss = loss_sum / n_traj;
  metrics.clip_fraction = clip_sum / n_traj;
  metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  if (out_batch) *out_batch = std::move(batch);
  state.next_iteration += 1;
  return metrics;
}

// ----------------------------------------------------------------- train

struct TrainHooks {
  std::function<void(const IterationBatch&, const TrainState&)> on_batch;
  std::function<void(const IterationMetrics&)> on_metrics;
};

struct TrainInputs {
  TaskSpec task;
  int num_problems = 256;
  NetConfig model;
  TrainerConfig trainer;
  RLConfig rl;
  bool offline_mode = false;
  std::vector<OfflineRecord> offline_records;
  std::filesystem::path metrics_path;    // empty: keep metrics in memory only
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
  std::optional<Checkpoint> resume;
};

namespace detail {

inline std::string checkpoint_name(std::uint64_t iteration) {
  std::string n = std::to_string(iteration);
  while (n.size() < 6) n.insert(n.begin(), '0');
  return "ckpt_" + n + ".rise";
}

}  // namespace detail

// Runs epochs x (num_problems / train_batch_size) iterations over the
// shuffled problem set, appending one metrics record per iteration and
// writing periodic checkpoints plus a final one.
inline TrainState train(const TrainInputs& in, const Vocabulary& vocab,
                        const VerificationTemplate& tmpl, const TrainHooks& hooks = {}) {
  in.trainer.validate();
  in.rl.validate();
  if (in.num_problems < in.trainer.train_batch_size) {
    throw config_error("trainer: num_problems (" + std::to_string(in.num_problems) +
                       ") must be >= train_batch_size (" +
                       std::to_string(in.trainer.train_batch_size) + ")");
  }
  if (in.offline_mode && in.offline_records.empty()) {
    throw config_error("trainer: offline verification mode requires offline records");
  }

  NetConfig model = in.model;
  model.vocab_size = vocab.size();

  TrainState state;
  if (in.resume) {
    require_same_arch(model, in.resume->actor.cfg, "resume");
    if (!in.resume->has_trainer_state) {
      throw config_error("resume: checkpoint has no trainer state");
    }
    state.actor = in.resume->actor;
    state.critic = in.resume->critic;
    state.ref_actor = in.resume->ref_actor;
    state.trainer_seed = in.resume->trainer_seed;
    state.next_iteration = in.resume->next_iteration;
  } else {
    state = make_train_state(model, in.trainer.seed);
  }

  const std::vector<Problem> problems = generate_problems(in.task, in.num_problems);
  const std::size_t batches_per_epoch = static_cast<std::size_t>(in.num_problems) /
                                        static_cast<std::size_t>(in.trainer.train_batch_size);
  const std::uint64_t total_iterations =
      static_cast<std::uint64_t>(in.trainer.epochs) * batches_per_epoch;

  std::ofstream metrics_out;
  if (!in.metrics_path.empty()) {
    metrics_out.open(in.metrics_path, state.next_iteration == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics_out) throw io_error("cannot open metrics file: " + in.metrics_path.string());
  }
  if (!in.checkpoint_dir.empty()) std::filesystem::create_directories(in.checkpoint_dir);

  const auto save_state = [&](const std::filesystem::path& path) {
    Checkpoint ckpt;
    ckpt.actor = state.actor;
    ckpt.critic = state.critic;
    ckpt.has_trainer_state = true;
    ckpt.ref_actor = state.ref_actor;
    ckpt.trainer_seed = state.trainer_seed;
    ckpt.next_iteration = state.next_iteration;
    save_checkpoint(path, ckpt);
  };

  while (state.next_iteration < total_iterations) {
    const std::uint64_t iter = state.next_iteration;
    const std::uint64_t epoch = iter / batches_per_epoch;
    const std::size_t slot = static_cast<std::size_t>(iter % batches_per_epoch);

    Rng epoch_rng = make_rng(derive_seed(state.trainer_seed, "epoch", epoch));
    const std::vector<std::size_t> order = shuffled_indices(problems.size(), epoch_rng);

    std::vector<Problem> batch_problems;
    batch_problems.reserve(static_cast<std::size_t>(in.trainer.train_batch_size));
    for (std::size_t i = 0; i < static_cast<std::size_t>(in.trainer.train_batch_size); ++i) {
      batch_problems.push_back(problems[order[slot * in.trainer.train_batch_size + i]]);
    }

    IterationBatch batch;
    const IterationMetrics metrics =
        run_iteration(state, batch_problems, in.trainer, in.rl, vocab, tmpl, in.offline_records,
                      in.offline_mode, hooks.on_batch ? &batch : nullptr);

    if (hooks.on_batch) hooks.on_batch(batch, state);
    if (hooks.on_metrics) hooks.on_metrics(metrics);
    if (metrics_out) {
      metrics_out << metrics_to_json(metrics).dump() << '\n';
      metrics_out.flush();
    }
    if (!in.checkpoint_dir.empty() && in.trainer.checkpoint_every > 0 &&
        state.next_iteration % static_cast<std::uint64_t>(in.trainer.checkpoint_every) == 0 &&
        state.next_iteration < total_iterations) {
      save_state(in.checkpoint_dir / detail::checkpoint_name(state.next_iteration));
    }
  }

  if (!in.checkpoint_dir.empty()) save_state(in.checkpoint_dir / "ckpt_final.rise");
  return state;
}

}  // namespace rise

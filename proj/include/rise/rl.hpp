#pragma once

// Advantage estimation and the PPO objectives.
//
// GAE: delta_t = r_t + gamma*V(s_{t+1}) - V(s_t) with V at the terminal
// state taken as 0; A_t is the (gamma*lambda)-weighted tail sum of deltas,
// computed by backward recursion. Value targets are V_old(s_t) + A_t.
//
// Actor surrogate per token: min(rho*A, clip(rho, 1-eps, 1+eps)*A) minus an
// optional KL penalty, averaged over the response length. Critic loss per
// token: max of the unclipped and value-clipped squared errors, averaged
// the same way. Both return d(mean)/d(per-token input) so the policy
// backward ops can be driven directly.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rise/verifier.hpp"

namespace rise {

struct RLConfig {
  double gamma = 1.0;
  double lam = 1.0;
  double clip_eps = 0.2;
  double value_clip = 0.5;
  double kl_coeff = 0.0;
  double actor_lr = 12.0;
  double critic_lr = 0.18;

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw config_error("rl: gamma must be in [0,1]");
    if (lam < 0.0 || lam > 1.0) throw config_error("rl: lam must be in [0,1]");
    if (!(clip_eps > 0.0)) throw config_error("rl: clip_eps must be positive");
    if (!(value_clip > 0.0)) throw config_error("rl: value_clip must be positive");
    if (kl_coeff < 0.0) throw config_error("rl: kl_coeff must be nonnegative");
    if (!(actor_lr > 0.0)) throw config_error("rl: actor_lr must be positive");
    if (!(critic_lr > 0.0)) throw config_error("rl: critic_lr must be positive");
  }
};

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

// Zeros everywhere except the terminal reward at the last position.
inline std::vector<double> terminal_reward_vector(OutcomeReward reward, int T) {
  if (T < 1) throw std::invalid_argument("terminal_reward_vector: T must be >= 1");
  std::vector<double> r(static_cast<std::size_t>(T), 0.0);
  r.back() = reward_value(reward);
  return r;
}

inline AdvantageEstimate gae(std::span<const double> rewards, std::span<const double> values,
                             double gamma, double lam) {
  const std::size_t T = rewards.size();
  if (T == 0 || values.size() != T) {
    throw std::invalid_argument("gae: rewards and values must be non-empty and equal length");
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (!std::isfinite(rewards[t]) || !std::isfinite(values[t])) {
      throw std::invalid_argument("gae: non-finite input");
    }
  }
  AdvantageEstimate est;
  est.advantages.resize(T);
  est.value_targets.resize(T);
  double tail = 0.0;
  for (std::size_t i = T; i-- > 0;) {
    const double next_value = (i + 1 < T) ? values[i + 1] : 0.0;
    const double delta = rewards[i] + gamma * next_value - values[i];
    tail = delta + gamma * lam * tail;
    est.advantages[i] = tail;
  }
  for (std::size_t t = 0; t < T; ++t) est.value_targets[t] = values[t] + est.advantages[t];
  return est;
}

// Group-mean baseline: advantage_i = r_i - mean(r), broadcast per token by
// the caller. Provided as the estimator alternative; the trainer uses GAE.
inline std::vector<double> group_baseline_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("group_baseline_advantage: need at least 2 rollouts");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  return adv;
}

// Per-token sampled-token KL estimator against the reference policy.
inline std::vector<double> kl_penalty(std::span<const double> new_logprobs,
                                      std::span<const double> ref_logprobs) {
  if (new_logprobs.size() != ref_logprobs.size()) {
    throw std::invalid_argument("kl_penalty: length mismatch");
  }
  std::vector<double> kl(new_logprobs.size());
  for (std::size_t t = 0; t < kl.size(); ++t) kl[t] = new_logprobs[t] - ref_logprobs[t];
  return kl;
}

struct ActorObjective {
  double objective = 0.0;               // token mean, to be maximized
  std::vector<double> grad_weights;     // d(objective)/d(new_logprob_t)
  double clip_fraction = 0.0;           // tokens where the clipped branch was active
  double kl_mean = 0.0;
};

// ref_logprobs may be empty when config.kl_coeff == 0.
inline ActorObjective ppo_actor_objective(std::span<const double> new_logprobs,
                                          std::span<const double> old_logprobs,
                                          std::span<const double> advantages,
                                          std::span<const double> ref_logprobs,
                                          const RLConfig& config) {
  const std::size_t T = new_logprobs.size();
  if (T == 0 || old_logprobs.size() != T || advantages.size() != T) {
    throw std::invalid_argument("ppo_actor_objective: length mismatch");
  }
  const bool use_kl = config.kl_coeff != 0.0;
  if (use_kl && ref_logprobs.size() != T) {
    throw std::invalid_argument("ppo_actor_objective: ref_logprobs required when kl_coeff != 0");
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (!std::isfinite(old_logprobs[t])) {
      throw std::invalid_argument("ppo_actor_objective: non-finite old_logprob");
    }
  }

  ActorObjective result;
  result.grad_weights.resize(T);
  const double inv_T = 1.0 / static_cast<double>(T);
  double clipped = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double rho = std::exp(new_logprobs[t] - old_logprobs[t]);
    const double adv = advantages[t];
    const double unclipped = rho * adv;
    const double rho_clipped = std::min(std::max(rho, 1.0 - config.clip_eps), 1.0 + config.clip_eps);
    const double surrogate = std::min(unclipped, rho_clipped * adv);
    // d(surrogate)/d(logprob): rho*adv on the unclipped branch, 0 where the
    // clipped branch is strictly smaller (the clamp is saturated there).
    double w = unclipped <= rho_clipped * adv ? unclipped : 0.0;
    if (unclipped > rho_clipped * adv) clipped += 1.0;
    double term = surrogate;
    if (use_kl) {
      const double kl = new_logprobs[t] - ref_logprobs[t];
      term -= config.kl_coeff * kl;
      w -= config.kl_coeff;
      result.kl_mean += kl * inv_T;
    }
    result.objective += term * inv_T;
    result.grad_weights[t] = w * inv_T;
  }
  result.clip_fraction = clipped * inv_T;
  return result;
}

struct CriticObjective {
  double loss = 0.0;                 // token mean, to be minimized
  std::vector<double> grad_weights;  // d(loss)/d(new_value_t)
};

inline CriticObjective critic_objective(std::span<const double> new_values,
                                        std::span<const double> old_values,
                                        std::span<const double> value_targets,
                                        double value_clip) {
  const std::size_t T = new_values.size();
  if (T == 0 || old_values.size() != T || value_targets.size() != T) {
    throw std::invalid_argument("critic_objective: length mismatch");
  }
  CriticObjective result;
  result.grad_weights.resize(T);
  const double inv_T = 1.0 / static_cast<double>(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double err = new_values[t] - value_targets[t];
    const double v_clipped = std::min(std::max(new_values[t], old_values[t] - value_clip),
                                      old_values[t] + value_clip);
    const double err_clipped = v_clipped - value_targets[t];
    const double sq = err * err;
    const double sq_clipped = err_clipped * err_clipped;
    if (sq >= sq_clipped) {
      result.loss += sq * inv_T;
      result.grad_weights[t] = 2.0 * err * inv_T;
    } else {
      result.loss += sq_clipped * inv_T;
      // max picked the clipped branch, whose clamp is saturated here.
      result.grad_weights[t] = 0.0;
    }
  }
  return result;
}

}  // namespace rise

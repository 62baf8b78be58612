#pragma once

// Autoregressive actor and critic over the task vocabulary.
//
// Architecture (both nets share the trunk shape): the last `window` token
// ids of (prompt + response so far), left-padded with BOS, are embedded and
// concatenated, then passed through two tanh layers and a linear head --
// |V| logits for the actor, one scalar for the critic.
//
// All math is double precision with hand-written fixed-order kernels, so a
// forward pass produces bit-identical results regardless of batching or
// thread count. Gradients are analytic and checked against central finite
// differences in the test suite.
//
// Parameter layout (flat vector, also the checkpoint order):
//   emb[V][E] | w1[C*E][H] | b1[H] | w2[H][H] | b2[H] | w3[H][O] | b3[O]
// w1/w2/w3 are stored input-major: row i holds the fan-out weights of
// input unit i, which keeps every forward accumulation a contiguous axpy.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rise/rng.hpp"
#include "rise/util.hpp"
#include "rise/verifier.hpp"
#include "rise/vocab.hpp"

namespace rise {

struct NetConfig {
  int vocab_size = 0;
  int embed_dim = 6;
  int window = 96;
  int hidden = 32;

  bool operator==(const NetConfig&) const = default;

  std::string describe() const {
    return "(vocab=" + std::to_string(vocab_size) + ", embed=" + std::to_string(embed_dim) +
           ", window=" + std::to_string(window) + ", hidden=" + std::to_string(hidden) + ")";
  }
};

namespace detail {

inline void axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// Four fixed accumulator lanes; the summation order never depends on the
// surrounding batch shape.
inline double dot(const double* a, const double* b, int n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3)) + tail;
}

}  // namespace detail

struct NetParams {
  NetConfig cfg;
  int outputs = 0;
  std::vector<double> flat;

  int input_dim() const { return cfg.window * cfg.embed_dim; }

  std::size_t off_emb() const { return 0; }
  std::size_t off_w1() const { return off_emb() + static_cast<std::size_t>(cfg.vocab_size) * cfg.embed_dim; }
  std::size_t off_b1() const { return off_w1() + static_cast<std::size_t>(input_dim()) * cfg.hidden; }
  std::size_t off_w2() const { return off_b1() + cfg.hidden; }
  std::size_t off_b2() const { return off_w2() + static_cast<std::size_t>(cfg.hidden) * cfg.hidden; }
  std::size_t off_w3() const { return off_b2() + cfg.hidden; }
  std::size_t off_b3() const { return off_w3() + static_cast<std::size_t>(cfg.hidden) * outputs; }
  std::size_t param_count() const { return off_b3() + outputs; }

  const double* emb_row(int v) const { return flat.data() + off_emb() + static_cast<std::size_t>(v) * cfg.embed_dim; }
  const double* w1_row(int i) const { return flat.data() + off_w1() + static_cast<std::size_t>(i) * cfg.hidden; }
  const double* b1() const { return flat.data() + off_b1(); }
  const double* w2_row(int h) const { return flat.data() + off_w2() + static_cast<std::size_t>(h) * cfg.hidden; }
  const double* b2() const { return flat.data() + off_b2(); }
  const double* w3_row(int h) const { return flat.data() + off_w3() + static_cast<std::size_t>(h) * outputs; }
  const double* b3() const { return flat.data() + off_b3(); }
};

struct ActorParams : NetParams {};
struct CriticParams : NetParams {};

inline ActorParams init_actor(const NetConfig& cfg, std::uint64_t seed) {
  ActorParams p;
  p.cfg = cfg;
  p.outputs = cfg.vocab_size;
  p.flat.resize(p.param_count());
  Rng rng = make_rng(seed);
  for (double& v : p.flat) v = uniform_range(rng, -0.05, 0.05);
  return p;
}

// Critic trunk is initialized like the actor; the scalar head starts at
// zero so initial values are exactly 0.
inline CriticParams init_critic(const NetConfig& cfg, std::uint64_t seed) {
  CriticParams p;
  p.cfg = cfg;
  p.outputs = 1;
  p.flat.resize(p.param_count());
  Rng rng = make_rng(seed);
  for (double& v : p.flat) v = uniform_range(rng, -0.05, 0.05);
  for (std::size_t i = p.off_w3(); i < p.param_count(); ++i) p.flat[i] = 0.0;
  return p;
}

inline std::uint64_t params_checksum(const NetParams& p) {
  return fnv1a64(p.flat.data(), p.flat.size() * sizeof(double));
}

// ------------------------------------------------------------- trajectories

enum class TaskTag { gen, ver };

struct Trajectory {
  std::string problem_id;
  TaskTag tag = TaskTag::gen;
  std::vector<int> prompt_tokens;
  std::vector<int> response_tokens;
  std::vector<double> old_logprobs;
  std::vector<double> values;
  OutcomeReward reward = OutcomeReward::unboxed;
  std::string rendered_text;
};

// ---------------------------------------------------------------- forward

namespace detail {

// State s_t is the last `window` ids of prompt + response[0..t), padded on
// the left with BOS. Values and logits at position t therefore depend only
// on the prompt and earlier response tokens.
inline void fill_window(std::span<const int> prompt, std::span<const int> response,
                        int t, int window, int bos, int* out) {
  const int prompt_len = static_cast<int>(prompt.size());
  const int total = prompt_len + t;
  for (int c = 0; c < window; ++c) {
    const int pos = total - window + c;
    if (pos < 0) {
      out[c] = bos;
    } else if (pos < prompt_len) {
      out[c] = prompt[static_cast<std::size_t>(pos)];
    } else {
      out[c] = response[static_cast<std::size_t>(pos - prompt_len)];
    }
  }
}

inline void check_ids(const Vocabulary& vocab, std::span<const int> ids, const char* what) {
  for (int id : ids) {
    if (!vocab.valid_id(id)) {
      throw std::invalid_argument(std::string(what) + ": token id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(vocab.size()));
    }
  }
}

// Single-state forward; the one code path used by sampling, scoring and
// backprop alike, so results are bit-identical everywhere.
inline void forward_state(const NetParams& net, const int* win, double* x, double* a1,
                          double* a2, double* out) {
  const int C = net.cfg.window;
  const int E = net.cfg.embed_dim;
  const int CE = C * E;
  const int H = net.cfg.hidden;
  const int O = net.outputs;
  for (int c = 0; c < C; ++c) {
    const double* e = net.emb_row(win[c]);
    double* dst = x + static_cast<std::size_t>(c) * E;
    for (int k = 0; k < E; ++k) dst[k] = e[k];
  }
  for (int h = 0; h < H; ++h) a1[h] = net.b1()[h];
  for (int i = 0; i < CE; ++i) axpy(x[i], net.w1_row(i), a1, H);
  for (int h = 0; h < H; ++h) a1[h] = std::tanh(a1[h]);
  for (int h = 0; h < H; ++h) a2[h] = net.b2()[h];
  for (int h = 0; h < H; ++h) axpy(a1[h], net.w2_row(h), a2, H);
  for (int h = 0; h < H; ++h) a2[h] = std::tanh(a2[h]);
  for (int o = 0; o < O; ++o) out[o] = net.b3()[o];
  for (int h = 0; h < H; ++h) axpy(a2[h], net.w3_row(h), out, O);
}

}  // namespace detail

// Cached activations for one trajectory; reusable buffer.
struct TrajectoryCache {
  int T = 0;
  std::vector<int> windows;  // T * window
  std::vector<double> x;     // T * (window*embed)
  std::vector<double> a1;    // T * hidden
  std::vector<double> a2;    // T * hidden
  std::vector<double> out;   // T * outputs
};

// Forward over all T states of (prompt, response); fills the cache.
inline void forward_trajectory(const NetParams& net, std::span<const int> prompt,
                               std::span<const int> response, TrajectoryCache& cache) {
  const int T = static_cast<int>(response.size());
  if (T < 1) throw std::invalid_argument("forward_trajectory: empty response");
  const int C = net.cfg.window;
  const int E = net.cfg.embed_dim;
  const int CE = net.input_dim();
  const int H = net.cfg.hidden;
  const int O = net.outputs;

  cache.T = T;
  cache.windows.resize(static_cast<std::size_t>(T) * C);
  cache.x.resize(static_cast<std::size_t>(T) * CE);
  cache.a1.resize(static_cast<std::size_t>(T) * H);
  cache.a2.resize(static_cast<std::size_t>(T) * H);
  cache.out.resize(static_cast<std::size_t>(T) * O);

  for (int t = 0; t < T; ++t) {
    int* win = cache.windows.data() + static_cast<std::size_t>(t) * C;
    detail::fill_window(prompt, response, t, C, 0, win);
    detail::forward_state(net, win, cache.x.data() + static_cast<std::size_t>(t) * CE,
                          cache.a1.data() + static_cast<std::size_t>(t) * H,
                          cache.a2.data() + static_cast<std::size_t>(t) * H,
                          cache.out.data() + static_cast<std::size_t>(t) * O);
  }
  (void)E;
}

// Backprop from d(objective)/d(out) rows through the cached activations,
// accumulating into grad (same layout and length as net.flat).
inline void backward_trajectory(const NetParams& net, const TrajectoryCache& cache,
                                std::span<const double> dout, std::span<double> grad) {
  const int C = net.cfg.window;
  const int E = net.cfg.embed_dim;
  const int CE = net.input_dim();
  const int H = net.cfg.hidden;
  const int O = net.outputs;
  if (grad.size() != net.param_count()) {
    throw std::invalid_argument("backward_trajectory: bad gradient buffer size");
  }
  if (dout.size() != static_cast<std::size_t>(cache.T) * O) {
    throw std::invalid_argument("backward_trajectory: bad dout size");
  }

  double* g = grad.data();
  double* g_emb = g + net.off_emb();
  double* g_w1 = g + net.off_w1();
  double* g_b1 = g + net.off_b1();
  double* g_w2 = g + net.off_w2();
  double* g_b2 = g + net.off_b2();
  double* g_w3 = g + net.off_w3();
  double* g_b3 = g + net.off_b3();

  std::vector<double> dh2(H), dh1(H), dx(CE);
  for (int t = 0; t < cache.T; ++t) {
    const double* dout_row = dout.data() + static_cast<std::size_t>(t) * O;
    const double* a1 = cache.a1.data() + static_cast<std::size_t>(t) * H;
    const double* a2 = cache.a2.data() + static_cast<std::size_t>(t) * H;
    const double* x = cache.x.data() + static_cast<std::size_t>(t) * CE;
    const int* win = cache.windows.data() + static_cast<std::size_t>(t) * C;

    detail::axpy(1.0, dout_row, g_b3, O);
    for (int h = 0; h < H; ++h) {
      detail::axpy(a2[h], dout_row, g_w3 + static_cast<std::size_t>(h) * O, O);
      const double da2 = detail::dot(net.w3_row(h), dout_row, O);
      dh2[h] = da2 * (1.0 - a2[h] * a2[h]);
    }

    detail::axpy(1.0, dh2.data(), g_b2, H);
    for (int h = 0; h < H; ++h) {
      detail::axpy(a1[h], dh2.data(), g_w2 + static_cast<std::size_t>(h) * H, H);
      const double da1 = detail::dot(net.w2_row(h), dh2.data(), H);
      dh1[h] = da1 * (1.0 - a1[h] * a1[h]);
    }

    detail::axpy(1.0, dh1.data(), g_b1, H);
    for (int i = 0; i < CE; ++i) {
      detail::axpy(x[i], dh1.data(), g_w1 + static_cast<std::size_t>(i) * H, H);
      dx[i] = detail::dot(net.w1_row(i), dh1.data(), H);
    }

    for (int c = 0; c < C; ++c) {
      detail::axpy(1.0, dx.data() + static_cast<std::size_t>(c) * E,
                   g_emb + static_cast<std::size_t>(win[c]) * E, E);
    }
  }
}

// -------------------------------------------------------------- log-softmax

namespace detail {

inline double log_sum_exp(const double* logits, int n) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(logits[i] - mx);
  return mx + std::log(s);
}

inline std::vector<double> logprobs_from_cache(const NetParams& net, const TrajectoryCache& cache,
                                               std::span<const int> response) {
  const int V = net.outputs;
  std::vector<double> lp(response.size());
  for (std::size_t t = 0; t < response.size(); ++t) {
    const double* row = cache.out.data() + t * V;
    lp[t] = row[response[t]] - log_sum_exp(row, V);
  }
  return lp;
}

// d/d(logits) of sum_t weights[t] * log softmax(logits_t)[response_t].
inline std::vector<double> actor_dout_from_cache(const NetParams& net,
                                                 const TrajectoryCache& cache,
                                                 std::span<const int> response,
                                                 std::span<const double> weights) {
  const int V = net.outputs;
  std::vector<double> dout(static_cast<std::size_t>(cache.T) * V);
  for (int t = 0; t < cache.T; ++t) {
    const double* row = cache.out.data() + static_cast<std::size_t>(t) * V;
    double* drow = dout.data() + static_cast<std::size_t>(t) * V;
    const double w = weights[static_cast<std::size_t>(t)];
    if (!std::isfinite(w)) throw std::invalid_argument("actor gradient: non-finite weight");
    const double lse = log_sum_exp(row, V);
    for (int v = 0; v < V; ++v) drow[v] = -w * std::exp(row[v] - lse);
    drow[response[static_cast<std::size_t>(t)]] += w;
  }
  return dout;
}

}  // namespace detail

// log pi(y_t | x, y_<t) for every response position; each entry <= 0.
inline std::vector<double> logprobs(const ActorParams& actor, const Vocabulary& vocab,
                                    std::span<const int> prompt, std::span<const int> response) {
  if (response.empty()) throw std::invalid_argument("logprobs: empty response");
  detail::check_ids(vocab, prompt, "logprobs(prompt)");
  detail::check_ids(vocab, response, "logprobs(response)");
  TrajectoryCache cache;
  forward_trajectory(actor, prompt, response, cache);
  return detail::logprobs_from_cache(actor, cache, response);
}

// V_phi(s_t) for every response position.
inline std::vector<double> values(const CriticParams& critic, const Vocabulary& vocab,
                                  std::span<const int> prompt, std::span<const int> response) {
  if (response.empty()) throw std::invalid_argument("values: empty response");
  detail::check_ids(vocab, prompt, "values(prompt)");
  detail::check_ids(vocab, response, "values(response)");
  TrajectoryCache cache;
  forward_trajectory(critic, prompt, response, cache);
  return std::vector<double>(cache.out.begin(), cache.out.end());
}

// -------------------------------------------------------------- gradients

// grad += d/dtheta sum_t weights[t] * log pi(response[t] | s_t)
inline void actor_backward(const ActorParams& actor, std::span<const int> prompt,
                           std::span<const int> response, std::span<const double> weights,
                           std::span<double> grad, TrajectoryCache* scratch = nullptr) {
  if (weights.size() != response.size()) {
    throw std::invalid_argument("actor_backward: weights/response size mismatch");
  }
  TrajectoryCache local;
  TrajectoryCache& cache = scratch ? *scratch : local;
  forward_trajectory(actor, prompt, response, cache);
  const std::vector<double> dout = detail::actor_dout_from_cache(actor, cache, response, weights);
  backward_trajectory(actor, cache, dout, grad);
}

// grad += d/dphi sum_t weights[t] * V_phi(s_t)
inline void critic_backward(const CriticParams& critic, std::span<const int> prompt,
                            std::span<const int> response, std::span<const double> weights,
                            std::span<double> grad, TrajectoryCache* scratch = nullptr) {
  if (weights.size() != response.size()) {
    throw std::invalid_argument("critic_backward: weights/response size mismatch");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("critic_backward: non-finite weight");
  }
  TrajectoryCache local;
  TrajectoryCache& cache = scratch ? *scratch : local;
  forward_trajectory(critic, prompt, response, cache);
  backward_trajectory(critic, cache, weights, grad);
}

// --------------------------------------------------------------- sampling

// Draws a response token by token from softmax(logits / temperature).
// old_logprobs record the untempered policy log-probability of each sampled
// token (the Eq. ratio is defined on the policy, not the tempered sampler).
// Stops at EOS (which is kept in the response) or at max_len.
inline Trajectory sample_response(const ActorParams& actor, const Vocabulary& vocab,
                                  std::span<const int> prompt, double temperature,
                                  int max_len, std::uint64_t seed,
                                  int max_prompt_len = kNoPromptLimit) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sample_response: temperature must be positive");
  }
  if (max_len < 1) throw std::invalid_argument("sample_response: max_len must be >= 1");
  if (static_cast<int>(prompt.size()) > max_prompt_len) {
    throw std::invalid_argument("sample_response: prompt length " +
                                std::to_string(prompt.size()) + " exceeds context budget " +
                                std::to_string(max_prompt_len));
  }
  detail::check_ids(vocab, prompt, "sample_response(prompt)");

  const int C = actor.cfg.window;
  const int CE = actor.input_dim();
  const int H = actor.cfg.hidden;
  const int V = actor.outputs;

  Rng rng = make_rng(seed);
  Trajectory traj;
  traj.prompt_tokens.assign(prompt.begin(), prompt.end());

  std::vector<int> win(C);
  std::vector<double> x(CE), a1(H), a2(H), logits(V);
  for (int t = 0; t < max_len; ++t) {
    detail::fill_window(prompt, traj.response_tokens, t, C, 0, win.data());
    detail::forward_state(actor, win.data(), x.data(), a1.data(), a2.data(), logits.data());

    const int tok = sample_softmax(logits, temperature, rng);
    traj.response_tokens.push_back(tok);
    traj.old_logprobs.push_back(logits[tok] - detail::log_sum_exp(logits.data(), V));
    if (tok == vocab.eos_id()) break;
  }
  traj.rendered_text = vocab.decode(traj.response_tokens);
  return traj;
}

// Plain SGD step: flat += scale * grad (ascent for positive scale, descent
// for negative). Gradients and parameters share one layout.
inline void apply_gradient(NetParams& net, std::span<const double> grad, double scale) {
  if (grad.size() != net.param_count()) {
    throw std::invalid_argument("apply_gradient: bad gradient size");
  }
  detail::axpy(scale, grad.data(), net.flat.data(), static_cast<int>(grad.size()));
}

}  // namespace rise

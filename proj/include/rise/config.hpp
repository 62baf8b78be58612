#pragma once

// Experiment configuration: a small sectioned key = value format with a
// strict schema. Unknown sections or keys are hard errors, and validation
// reports every offending entry at once. resolve() materializes defaults
// and mode implications (zero_rl forces an empty verification batch), so a
// resolved snapshot re-parses to itself.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rise/eval.hpp"
#include "rise/policy.hpp"
#include "rise/rl.hpp"
#include "rise/tasks.hpp"
#include "rise/trainer.hpp"
#include "rise/util.hpp"

namespace rise {

inline constexpr std::string_view kOutRootEnvVar = "RISE_OUT_ROOT";

struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 42;
  std::string out_dir;  // default: $RISE_OUT_ROOT or "runs"
  int threads = 1;
  // [task]
  TaskKind task_kind = TaskKind::mod_add;
  int modulus = 23;
  int digits = 2;
  int num_problems = 256;
  int eval_num_problems = 64;
  // [model]
  int embed_dim = 6;
  int window = 96;
  int hidden = 32;
  // [trainer]
  TrainerConfig trainer;
  // [rl]
  RLConfig rl;
  // [eval]
  int eval_k = 8;
  double eval_temperature = 1.0;
  double vote_alpha = 2.0;
  int vote_d = 2;
  bool score_sum_over_all = false;
  std::vector<std::string> verification_keywords = kVerificationKeywords;
  std::vector<std::string> reflection_keywords = kReflectionKeywords;
  int eval_max_response_len = 160;
  // [mode]
  bool zero_rl = false;
  std::string offline_verification;  // path to offline records; empty = online

  TaskSpec task_spec(std::uint64_t task_seed) const {
    TaskSpec spec;
    spec.kind = task_kind;
    spec.modulus = modulus;
    spec.digits = digits;
    spec.seed = task_seed;
    return spec;
  }

  NetConfig model(int vocab_size) const {
    NetConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.embed_dim = embed_dim;
    cfg.window = window;
    cfg.hidden = hidden;
    return cfg;
  }

  EvalOptions eval_options(std::uint64_t eval_seed) const {
    EvalOptions opt;
    opt.k = eval_k;
    opt.temperature = eval_temperature;
    opt.vote.alpha = vote_alpha;
    opt.vote.d = vote_d;
    opt.vote.score_sum_over_all = score_sum_over_all;
    opt.verification_keywords = verification_keywords;
    opt.reflection_keywords = reflection_keywords;
    opt.max_response_len = eval_max_response_len;
    opt.seed = eval_seed;
    opt.threads = threads;
    return opt;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string join_keywords(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ",";
    out += words[i];
  }
  return out;
}

struct ConfigParseState {
  std::vector<std::string> errors;

  void error(std::string msg) { errors.push_back(std::move(msg)); }

  bool parse_int(std::string_view key, std::string_view value, int& out) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(std::string(value), &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing characters");
      out = v;
      return true;
    } catch (const std::exception&) {
      error(std::string(key) + ": expected integer, got '" + std::string(value) + "'");
      return false;
    }
  }

  bool parse_u64(std::string_view key, std::string_view value, std::uint64_t& out) {
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(std::string(value), &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing characters");
      out = v;
      return true;
    } catch (const std::exception&) {
      error(std::string(key) + ": expected unsigned integer, got '" + std::string(value) + "'");
      return false;
    }
  }

  bool parse_double(std::string_view key, std::string_view value, double& out) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(std::string(value), &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing characters");
      out = v;
      return true;
    } catch (const std::exception&) {
      error(std::string(key) + ": expected number, got '" + std::string(value) + "'");
      return false;
    }
  }

  bool parse_bool(std::string_view key, std::string_view value, bool& out) {
    if (value == "true") {
      out = true;
      return true;
    }
    if (value == "false") {
      out = false;
      return true;
    }
    error(std::string(key) + ": expected true or false, got '" + std::string(value) + "'");
    return false;
  }

  bool parse_keywords(std::string_view key, std::string_view value,
                      std::vector<std::string>& out) {
    std::vector<std::string> words;
    std::string current;
    for (char c : value) {
      if (c == ',') {
        words.push_back(std::string(trim(current)));
        current.clear();
      } else {
        current += c;
      }
    }
    words.push_back(std::string(trim(current)));
    for (auto& w : words) {
      if (w.empty()) {
        error(std::string(key) + ": empty keyword in list");
        return false;
      }
      w = to_lower(w);
    }
    out = std::move(words);
    return true;
  }
};

}  // namespace detail

// Parses the text without resolving defaults; throws config_error listing
// every malformed line, unknown section, unknown key, or bad value.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  detail::ConfigParseState st;
  std::string section;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::vector<std::string> unknown_sections;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        st.error("line " + std::to_string(lineno) + ": malformed section header '" +
                 std::string(line) + "'");
        continue;
      }
      section = std::string(line.substr(1, line.size() - 2));
      static const char* known[] = {"run", "task", "model", "trainer", "rl", "eval", "mode"};
      bool ok = false;
      for (const char* s : known) ok = ok || section == s;
      if (!ok) {
        st.error("unknown section: [" + section + "]");
        unknown_sections.push_back(section);
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      st.error("line " + std::to_string(lineno) + ": expected key = value, got '" +
               std::string(line) + "'");
      continue;
    }
    const std::string key = std::string(trim(line.substr(0, eq)));
    const std::string value = std::string(trim(line.substr(eq + 1)));
    bool in_unknown = false;
    for (const auto& s : unknown_sections) in_unknown = in_unknown || s == section;
    if (in_unknown) continue;
    const std::string qual = section + "." + key;

    if (section == "run") {
      if (key == "seed") st.parse_u64(qual, value, cfg.seed);
      else if (key == "out_dir") cfg.out_dir = value;
      else if (key == "threads") st.parse_int(qual, value, cfg.threads);
      else st.error("unknown key: " + qual);
    } else if (section == "task") {
      if (key == "kind") {
        if (auto kind = parse_task_kind(value)) cfg.task_kind = *kind;
        else st.error(qual + ": unknown task kind '" + value + "'");
      } else if (key == "modulus") st.parse_int(qual, value, cfg.modulus);
      else if (key == "digits") st.parse_int(qual, value, cfg.digits);
      else if (key == "num_problems") st.parse_int(qual, value, cfg.num_problems);
      else if (key == "eval_num_problems") st.parse_int(qual, value, cfg.eval_num_problems);
      else st.error("unknown key: " + qual);
    } else if (section == "model") {
      if (key == "embed_dim") st.parse_int(qual, value, cfg.embed_dim);
      else if (key == "window") st.parse_int(qual, value, cfg.window);
      else if (key == "hidden") st.parse_int(qual, value, cfg.hidden);
      else st.error("unknown key: " + qual);
    } else if (section == "trainer") {
      if (key == "train_batch_size") st.parse_int(qual, value, cfg.trainer.train_batch_size);
      else if (key == "minibatch_size") st.parse_int(qual, value, cfg.trainer.minibatch_size);
      else if (key == "rollouts_per_problem") st.parse_int(qual, value, cfg.trainer.rollouts_per_problem);
      else if (key == "verification_batch_size") st.parse_int(qual, value, cfg.trainer.verification_batch_size);
      else if (key == "verification_rollouts") st.parse_int(qual, value, cfg.trainer.verification_rollouts);
      else if (key == "max_response_len") st.parse_int(qual, value, cfg.trainer.max_response_len);
      else if (key == "max_prompt_len") st.parse_int(qual, value, cfg.trainer.max_prompt_len);
      else if (key == "epochs") st.parse_int(qual, value, cfg.trainer.epochs);
      else if (key == "temperature") st.parse_double(qual, value, cfg.trainer.temperature);
      else if (key == "checkpoint_every") st.parse_int(qual, value, cfg.trainer.checkpoint_every);
      else st.error("unknown key: " + qual);
    } else if (section == "rl") {
      if (key == "gamma") st.parse_double(qual, value, cfg.rl.gamma);
      else if (key == "lam") st.parse_double(qual, value, cfg.rl.lam);
      else if (key == "clip_eps") st.parse_double(qual, value, cfg.rl.clip_eps);
      else if (key == "value_clip") st.parse_double(qual, value, cfg.rl.value_clip);
      else if (key == "kl_coeff") st.parse_double(qual, value, cfg.rl.kl_coeff);
      else if (key == "actor_lr") st.parse_double(qual, value, cfg.rl.actor_lr);
      else if (key == "critic_lr") st.parse_double(qual, value, cfg.rl.critic_lr);
      else st.error("unknown key: " + qual);
    } else if (section == "eval") {
      if (key == "k") st.parse_int(qual, value, cfg.eval_k);
      else if (key == "temperature") st.parse_double(qual, value, cfg.eval_temperature);
      else if (key == "alpha") st.parse_double(qual, value, cfg.vote_alpha);
      else if (key == "d") st.parse_int(qual, value, cfg.vote_d);
      else if (key == "score_sum_over_all") st.parse_bool(qual, value, cfg.score_sum_over_all);
      else if (key == "verification_keywords") st.parse_keywords(qual, value, cfg.verification_keywords);
      else if (key == "reflection_keywords") st.parse_keywords(qual, value, cfg.reflection_keywords);
      else if (key == "max_response_len") st.parse_int(qual, value, cfg.eval_max_response_len);
      else st.error("unknown key: " + qual);
    } else if (section == "mode") {
      if (key == "zero_rl") st.parse_bool(qual, value, cfg.zero_rl);
      else if (key == "offline_verification") cfg.offline_verification = value;
      else st.error("unknown key: " + qual);
    } else {
      st.error("line " + std::to_string(lineno) + ": key '" + key + "' outside any section");
    }
  }

  if (!st.errors.empty()) {
    std::string msg = "configuration errors:";
    for (const auto& e : st.errors) msg += "\n  - " + e;
    throw config_error(msg);
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Materializes defaults and mode implications; validates everything and
// reports all violations together.
inline ExperimentConfig resolve_config(ExperimentConfig cfg) {
  std::vector<std::string> errors;

  if (cfg.out_dir.empty()) {
    const char* env = std::getenv(std::string(kOutRootEnvVar).c_str());
    cfg.out_dir = env && *env ? env : "runs";
  }
  if (cfg.zero_rl && !cfg.offline_verification.empty()) {
    errors.push_back("mode: zero_rl and offline_verification are mutually exclusive");
  }
  if (cfg.zero_rl) cfg.trainer.verification_batch_size = 0;
  if (!cfg.offline_verification.empty() && cfg.trainer.verification_batch_size == 0) {
    errors.push_back("mode: offline_verification requires verification_batch_size > 0");
  }
  if (cfg.trainer.verification_rollouts == 0) {
    cfg.trainer.verification_rollouts = cfg.trainer.rollouts_per_problem;
  }

  if (cfg.threads < 1) errors.push_back("run.threads must be >= 1");
  if (cfg.num_problems < 1) errors.push_back("task.num_problems must be >= 1");
  if (cfg.eval_num_problems < 1) errors.push_back("task.eval_num_problems must be >= 1");
  if (cfg.num_problems < cfg.trainer.train_batch_size) {
    errors.push_back("task.num_problems must be >= trainer.train_batch_size");
  }
  if (cfg.embed_dim < 1) errors.push_back("model.embed_dim must be >= 1");
  if (cfg.window < 1) errors.push_back("model.window must be >= 1");
  if (cfg.hidden < 1) errors.push_back("model.hidden must be >= 1");
  if (cfg.eval_k < 1) errors.push_back("eval.k must be >= 1");
  if (!(cfg.eval_temperature > 0.0)) errors.push_back("eval.temperature must be positive");
  if (cfg.vote_alpha < 0.0) errors.push_back("eval.alpha must be >= 0");
  if (cfg.vote_d < 1) errors.push_back("eval.d must be >= 1");
  if (cfg.eval_max_response_len < 1) errors.push_back("eval.max_response_len must be >= 1");

  try {
    TaskSpec spec = cfg.task_spec(0);
    validate_task_spec(spec);
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  try {
    cfg.trainer.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  try {
    cfg.rl.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }

  if (!errors.empty()) {
    std::string msg = "configuration errors:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw config_error(msg);
  }
  return cfg;
}

// Canonical emission; resolve(parse(emit(resolved))) is a fixed point.
inline std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "# rise experiment configuration (schema v" + std::to_string(kRunSchemaVersion) + ")\n";
  out += "\n[run]\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "out_dir = " + cfg.out_dir + "\n";
  out += "threads = " + std::to_string(cfg.threads) + "\n";
  out += "\n[task]\n";
  out += "kind = " + std::string(task_kind_name(cfg.task_kind)) + "\n";
  out += "modulus = " + std::to_string(cfg.modulus) + "\n";
  out += "digits = " + std::to_string(cfg.digits) + "\n";
  out += "num_problems = " + std::to_string(cfg.num_problems) + "\n";
  out += "eval_num_problems = " + std::to_string(cfg.eval_num_problems) + "\n";
  out += "\n[model]\n";
  out += "embed_dim = " + std::to_string(cfg.embed_dim) + "\n";
  out += "window = " + std::to_string(cfg.window) + "\n";
  out += "hidden = " + std::to_string(cfg.hidden) + "\n";
  out += "\n[trainer]\n";
  out += "train_batch_size = " + std::to_string(cfg.trainer.train_batch_size) + "\n";
  out += "minibatch_size = " + std::to_string(cfg.trainer.minibatch_size) + "\n";
  out += "rollouts_per_problem = " + std::to_string(cfg.trainer.rollouts_per_problem) + "\n";
  out += "verification_batch_size = " + std::to_string(cfg.trainer.verification_batch_size) + "\n";
  out += "verification_rollouts = " + std::to_string(cfg.trainer.verification_rollouts) + "\n";
  out += "max_response_len = " + std::to_string(cfg.trainer.max_response_len) + "\n";
  out += "max_prompt_len = " + std::to_string(cfg.trainer.max_prompt_len) + "\n";
  out += "epochs = " + std::to_string(cfg.trainer.epochs) + "\n";
  out += "temperature = " + detail::format_double(cfg.trainer.temperature) + "\n";
  out += "checkpoint_every = " + std::to_string(cfg.trainer.checkpoint_every) + "\n";
  out += "\n[rl]\n";
  out += "gamma = " + detail::format_double(cfg.rl.gamma) + "\n";
  out += "lam = " + detail::format_double(cfg.rl.lam) + "\n";
  out += "clip_eps = " + detail::format_double(cfg.rl.clip_eps) + "\n";
  out += "value_clip = " + detail::format_double(cfg.rl.value_clip) + "\n";
  out += "kl_coeff = " + detail::format_double(cfg.rl.kl_coeff) + "\n";
  out += "# kl_coeff = 0.01 enables the KL penalty against the initial policy\n";
  out += "actor_lr = " + detail::format_double(cfg.rl.actor_lr) + "\n";
  out += "critic_lr = " + detail::format_double(cfg.rl.critic_lr) + "\n";
  out += "\n[eval]\n";
  out += "k = " + std::to_string(cfg.eval_k) + "\n";
  out += "temperature = " + detail::format_double(cfg.eval_temperature) + "\n";
  out += "alpha = " + detail::format_double(cfg.vote_alpha) + "\n";
  out += "d = " + std::to_string(cfg.vote_d) + "\n";
  out += "score_sum_over_all = " + std::string(cfg.score_sum_over_all ? "true" : "false") + "\n";
  out += "verification_keywords = " + detail::join_keywords(cfg.verification_keywords) + "\n";
  out += "reflection_keywords = " + detail::join_keywords(cfg.reflection_keywords) + "\n";
  out += "max_response_len = " + std::to_string(cfg.eval_max_response_len) + "\n";
  out += "\n[mode]\n";
  out += "zero_rl = " + std::string(cfg.zero_rl ? "true" : "false") + "\n";
  out += "offline_verification = " + cfg.offline_verification + "\n";
  return out;
}

}  // namespace rise

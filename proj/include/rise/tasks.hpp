#pragma once

// Synthetic, programmatically verifiable arithmetic tasks. Four families,
// each with a mechanically checkable integer answer; generation is a pure
// function of (kind, difficulty, seed, n).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rise/rng.hpp"
#include "rise/util.hpp"
#include "rise/vocab.hpp"

namespace rise {

// Fixed instruction appended to every task statement; prompts end with it.
inline constexpr std::string_view kInstructionSentence =
    "Please reason step by step, and put your final answer within \\boxed{}.";

enum class TaskKind { mod_add, multi_digit_add, multi_digit_sub, compare };

inline std::string_view task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::mod_add: return "modadd";
    case TaskKind::multi_digit_add: return "add";
    case TaskKind::multi_digit_sub: return "sub";
    case TaskKind::compare: return "compare";
  }
  return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view name) {
  if (name == "modadd") return TaskKind::mod_add;
  if (name == "add") return TaskKind::multi_digit_add;
  if (name == "sub") return TaskKind::multi_digit_sub;
  if (name == "compare") return TaskKind::compare;
  return std::nullopt;
}

struct TaskSpec {
  TaskKind kind = TaskKind::mod_add;
  int modulus = 23;  // mod_add only
  int digits = 2;    // operand width for the other families
  std::uint64_t seed = 0;
};

struct Problem {
  std::string id;
  std::string statement;
  std::string answer;  // canonical decimal integer
};

inline void validate_task_spec(const TaskSpec& spec) {
  if (spec.kind == TaskKind::mod_add) {
    if (spec.modulus < 2) {
      throw config_error("task: modulus must be >= 2, got " +
                         std::to_string(spec.modulus));
    }
  } else {
    if (spec.digits < 1 || spec.digits > 12) {
      throw config_error("task: digits must be in [1, 12], got " +
                         std::to_string(spec.digits));
    }
  }
}

namespace detail {

inline std::string pad_number(long long v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline int decimal_width(long long v) {
  int w = 1;
  while (v >= 10) {
    v /= 10;
    ++w;
  }
  return w;
}

inline long long pow10(int d) {
  long long p = 1;
  while (d-- > 0) p *= 10;
  return p;
}

// Uniform operand with exactly `digits` digits (single-digit range
// includes 0 so the family covers the full 0..9 alphabet).
inline long long draw_operand(Rng& rng, int digits) {
  const long long lo = digits == 1 ? 0 : pow10(digits - 1);
  const long long hi = pow10(digits) - 1;
  return lo + static_cast<long long>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace detail

inline std::vector<Problem> generate_problems(const TaskSpec& spec, int n) {
  if (n < 1) throw std::invalid_argument("generate_problems: n must be >= 1");
  validate_task_spec(spec);

  Rng rng = make_rng(spec.seed);
  std::vector<Problem> out;
  out.reserve(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    Problem p;
    switch (spec.kind) {
      case TaskKind::mod_add: {
        const long long m = spec.modulus;
        const int width = detail::decimal_width(m - 1);
        const auto a = static_cast<long long>(uniform_below(rng, static_cast<std::uint64_t>(m)));
        const auto b = static_cast<long long>(uniform_below(rng, static_cast<std::uint64_t>(m)));
        // Operands are zero-padded to the modulus width so digit positions
        // are stable across problems.
        p.statement = "Compute (" + detail::pad_number(a, width) + "+" +
                      detail::pad_number(b, width) + ") mod " + std::to_string(m) + ".";
        p.answer = std::to_string((a + b) % m);
        p.id = std::string(task_kind_name(spec.kind)) + "-m" + std::to_string(m);
        break;
      }
      case TaskKind::multi_digit_add: {
        const long long a = detail::draw_operand(rng, spec.digits);
        const long long b = detail::draw_operand(rng, spec.digits);
        p.statement = "Compute " + std::to_string(a) + "+" + std::to_string(b) + ".";
        p.answer = std::to_string(a + b);
        p.id = std::string(task_kind_name(spec.kind)) + "-d" + std::to_string(spec.digits);
        break;
      }
      case TaskKind::multi_digit_sub: {
        const long long a = detail::draw_operand(rng, spec.digits);
        const long long b = detail::draw_operand(rng, spec.digits);
        p.statement = "Compute " + std::to_string(a) + "-" + std::to_string(b) + ".";
        p.answer = std::to_string(a - b);
        p.id = std::string(task_kind_name(spec.kind)) + "-d" + std::to_string(spec.digits);
        break;
      }
      case TaskKind::compare: {
        const long long a = detail::draw_operand(rng, spec.digits);
        long long b = detail::draw_operand(rng, spec.digits);
        while (b == a) b = detail::draw_operand(rng, spec.digits);
        p.statement = "Which is larger, " + std::to_string(a) + " or " +
                      std::to_string(b) + "?";
        p.answer = std::to_string(std::max(a, b));
        p.id = std::string(task_kind_name(spec.kind)) + "-d" + std::to_string(spec.digits);
        break;
      }
    }
    p.id += "-s" + std::to_string(spec.seed) + "-" + std::to_string(i);
    out.push_back(std::move(p));
  }
  return out;
}

// Prompt = BOS + statement + " " + instruction sentence. The decoded prompt
// always ends with the instruction.
inline std::vector<int> render_prompt(const Vocabulary& vocab, const Problem& problem) {
  if (problem.statement.empty()) {
    throw std::invalid_argument("render_prompt: empty statement");
  }
  std::vector<int> tokens;
  tokens.push_back(vocab.bos_id());
  const std::string text = problem.statement + " " + std::string(kInstructionSentence);
  const std::vector<int> body = vocab.encode(text);
  tokens.insert(tokens.end(), body.begin(), body.end());
  return tokens;
}

}  // namespace rise

#pragma once

// Rule-based outcome verifier: the ternary reward over boxed answers, the
// verification prompt template, verification-item construction with exact
// reward reuse, and score normalization for evaluation.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rise/tasks.hpp"
#include "rise/util.hpp"
#include "rise/vocab.hpp"

namespace rise {

// ---------------------------------------------------------------- rewards

enum class OutcomeReward { correct, boxed_mismatch, unboxed };

inline constexpr double reward_value(OutcomeReward r) {
  switch (r) {
    case OutcomeReward::correct: return 1.0;
    case OutcomeReward::boxed_mismatch: return -0.5;
    case OutcomeReward::unboxed: return -1.0;
  }
  return -1.0;
}

// Canonical score string, also the ground truth for verification tasks.
inline constexpr std::string_view score_string(OutcomeReward r) {
  switch (r) {
    case OutcomeReward::correct: return "1";
    case OutcomeReward::boxed_mismatch: return "-0.5";
    case OutcomeReward::unboxed: return "-1";
  }
  return "-1";
}

inline std::optional<OutcomeReward> reward_from_value(double v) {
  if (v == 1.0) return OutcomeReward::correct;
  if (v == -0.5) return OutcomeReward::boxed_mismatch;
  if (v == -1.0) return OutcomeReward::unboxed;
  return std::nullopt;
}

// ---------------------------------------------------------- canonical form

// Integer answers are normalized: trimmed, sign folded, leading zeros
// stripped, "-0" -> "0". Anything that is not a plain decimal integer is
// returned trimmed but otherwise unchanged (exact-match semantics).
inline std::string canonicalize_answer(std::string_view raw) {
  const std::string_view t = trim(raw);
  if (t.empty()) return std::string();
  std::size_t i = 0;
  bool negative = false;
  if (t[0] == '+' || t[0] == '-') {
    negative = t[0] == '-';
    i = 1;
  }
  if (i == t.size()) return std::string(t);
  for (std::size_t j = i; j < t.size(); ++j) {
    if (t[j] < '0' || t[j] > '9') return std::string(t);
  }
  while (i + 1 < t.size() && t[i] == '0') ++i;
  std::string digits(t.substr(i));
  if (digits == "0") return digits;
  return negative ? "-" + digits : digits;
}

// --------------------------------------------------------- boxed answers

namespace detail {

// Content of the boxed pair opening at `open_end` (index just past the
// marker), honoring nested braces; nullopt when unclosed.
inline std::optional<std::string> read_balanced(std::string_view text,
                                                std::size_t open_end) {
  int depth = 1;
  for (std::size_t i = open_end; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}') {
      --depth;
      if (depth == 0) return std::string(text.substr(open_end, i - open_end));
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Content of the last complete boxed pair, canonicalized. Total: absent or
// unclosed markers simply yield nullopt.
inline std::optional<std::string> extract_boxed_answer(std::string_view text) {
  std::size_t search_end = text.size();
  while (true) {
    const std::size_t open = text.rfind(kBoxedOpenMarker, search_end == 0 ? 0 : search_end - 1);
    if (open == std::string_view::npos) return std::nullopt;
    if (auto content = detail::read_balanced(text, open + kBoxedOpenMarker.size())) {
      return canonicalize_answer(*content);
    }
    if (open == 0) return std::nullopt;
    search_end = open;
  }
}

// The ternary verifiable reward: 1 boxed and matched, -0.5 boxed but not
// matched, -1 unboxed. ground_truth must be canonical.
inline OutcomeReward outcome_reward(std::string_view response_text,
                                    std::string_view ground_truth) {
  const auto boxed = extract_boxed_answer(response_text);
  if (!boxed) return OutcomeReward::unboxed;
  return *boxed == ground_truth ? OutcomeReward::correct
                                : OutcomeReward::boxed_mismatch;
}

// ---------------------------------------------------------- normalization

// Ternary score -> binary: 1 iff the score is exactly 1, else 0.
inline int normalize_score(OutcomeReward r) {
  return r == OutcomeReward::correct ? 1 : 0;
}

inline int normalize_score(double score) { return score == 1.0 ? 1 : 0; }

// String form is total: unparseable scores count as predicted-incorrect.
inline int normalize_score(std::string_view score) {
  return canonicalize_answer(score) == "1" ? 1 : 0;
}

// Continuous verifier scores in [0, 1] threshold at 0.5 (strict).
inline int normalize_continuous(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw std::domain_error("normalize_continuous: score outside [0, 1]");
  }
  return score > 0.5 ? 1 : 0;
}

// ----------------------------------------------------------- template

inline constexpr std::string_view kQuestionSlot = "{Question}";
inline constexpr std::string_view kResponseSlot = "{Response}";
inline constexpr std::string_view kQuestionBegin = "### Question Begin ###";
inline constexpr std::string_view kQuestionEnd = "### Question End ###";
inline constexpr std::string_view kResponseBegin = "### Response Begin ###";
inline constexpr std::string_view kResponseEnd = "### Response End ###";

inline constexpr std::string_view kRatingCriteria[3] = {
    "1. Missing final answer enclosed in \\boxed{} at the end: assign \\boxed{-1}.",
    "2. Correct response with the final answer enclosed in \\boxed{} at the end: assign \\boxed{1}.",
    "3. Incorrect response with the final answer enclosed in \\boxed{} at the end: assign \\boxed{-0.5}.",
};

inline constexpr std::string_view kVerificationTemplateText =
    R"(Below you are presented with a question and a tentative response. Your task is to evaluate and assign a rating to the response based on the following clear criteria:

Rating Criteria:

1. Missing final answer enclosed in \boxed{} at the end: assign \boxed{-1}.

2. Correct response with the final answer enclosed in \boxed{} at the end: assign \boxed{1}.

3. Incorrect response with the final answer enclosed in \boxed{} at the end: assign \boxed{-0.5}.

### Question Begin ###
{Question}
### Question End ###

### Response Begin ###
{Response}
### Response End ###

Briefly summarize your analysis, then clearly state your final rating value enclosed in \boxed{} at the end.
)";

class VerificationTemplate {
 public:
  static VerificationTemplate builtin() {
    return VerificationTemplate(std::string(kVerificationTemplateText));
  }

  static VerificationTemplate load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open verification template: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return VerificationTemplate(buf.str());
  }

  explicit VerificationTemplate(std::string text) : text_(std::move(text)) {
    for (std::string_view slot : {kQuestionSlot, kResponseSlot}) {
      if (text_.find(slot) == std::string::npos) {
        throw config_error("verification template is missing slot " + std::string(slot));
      }
    }
  }

  const std::string& text() const { return text_; }

  std::string instantiate(std::string_view question, std::string_view response) const {
    std::string out = replace_slot(text_, kQuestionSlot, question);
    return replace_slot(std::move(out), kResponseSlot, response);
  }

 private:
  std::string text_;
};

// Inverse of instantiate. The question is read up to the first end marker,
// the response up to the last, so an adversarial response that contains the
// marker line cannot shift the question and the original pair is recovered.
struct TemplateSlots {
  std::string question;
  std::string response;
};

inline std::optional<TemplateSlots> extract_template_slots(std::string_view prompt) {
  const std::size_t qb = prompt.find(kQuestionBegin);
  if (qb == std::string_view::npos) return std::nullopt;
  const std::size_t q_start = qb + kQuestionBegin.size() + 1;  // skip newline
  const std::size_t qe = prompt.find(kQuestionEnd, q_start);
  const std::size_t rb = prompt.find(kResponseBegin);
  if (qe == std::string_view::npos || rb == std::string_view::npos) return std::nullopt;
  const std::size_t r_start = rb + kResponseBegin.size() + 1;
  const std::size_t re = prompt.rfind(kResponseEnd);
  if (re == std::string_view::npos || re < r_start || qe < q_start) return std::nullopt;
  TemplateSlots slots;
  slots.question = std::string(prompt.substr(q_start, qe - q_start));
  slots.response = std::string(prompt.substr(r_start, re - r_start));
  // Strip the newline that precedes each end marker.
  if (!slots.question.empty() && slots.question.back() == '\n') slots.question.pop_back();
  if (!slots.response.empty() && slots.response.back() == '\n') slots.response.pop_back();
  return slots;
}

// ------------------------------------------------------ verification items

struct VerificationItem {
  std::vector<int> prompt_tokens;
  OutcomeReward target_score = OutcomeReward::unboxed;
  std::string source_problem_id;
  int source_solution_index = -1;
};

inline constexpr int kNoPromptLimit = 1 << 30;

// Formats (problem, solution) through the template and reuses the
// generation reward, bit-exact, as the target score. Returns nullopt when
// the tokenized prompt would exceed max_prompt_len; callers log and skip.
inline std::optional<VerificationItem> build_verification_item(
    const Problem& problem, std::string_view solution_text, OutcomeReward reward,
    const VerificationTemplate& tmpl, const Vocabulary& vocab,
    int source_solution_index = -1, int max_prompt_len = kNoPromptLimit) {
  const std::string prompt_text = tmpl.instantiate(problem.statement, solution_text);
  VerificationItem item;
  item.prompt_tokens.push_back(vocab.bos_id());
  const std::vector<int> body = vocab.encode(prompt_text);
  item.prompt_tokens.insert(item.prompt_tokens.end(), body.begin(), body.end());
  if (static_cast<int>(item.prompt_tokens.size()) > max_prompt_len) return std::nullopt;
  item.target_score = reward;
  item.source_problem_id = problem.id;
  item.source_solution_index = source_solution_index;
  return item;
}

// Verification responses are scored with the same outcome-verifier criteria
// against the canonical string of the target score.
inline OutcomeReward verification_reward(std::string_view verification_response_text,
                                         OutcomeReward target_score) {
  return outcome_reward(verification_response_text, score_string(target_score));
}

}  // namespace rise

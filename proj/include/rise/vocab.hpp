#pragma once

// Token vocabulary: character-level over a fixed ASCII subset plus three
// multi-character marker tokens (BOS, EOS, and the boxed-answer opener).
//
// The characters '\', '<' and '>' are deliberately excluded from the
// single-character set. Marker strings are therefore only producible by
// their dedicated tokens, which makes greedy longest-match encoding the
// exact inverse of decoding: encode(decode(ids)) == ids for every valid
// id sequence.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rise/util.hpp"

namespace rise {

inline constexpr std::string_view kBosMarker = "<s>";
inline constexpr std::string_view kEosMarker = "</s>";
inline constexpr std::string_view kBoxedOpenMarker = "\\boxed{";
inline constexpr std::string_view kBoxedCloseMarker = "}";

class Vocabulary {
 public:
  // The single-character set is the smallest ASCII subset that covers the
  // task statements, the instruction sentence, the verification template,
  // and the canonical answer and score strings.
  Vocabulary() {
    add_token(std::string(kBosMarker));
    add_token(std::string(kEosMarker));
    add_token(std::string(kBoxedOpenMarker));
    add_token("\n");
    for (char c : std::string_view(" #()+,-.0123456789:;?")) add_token(std::string(1, c));
    for (char c : std::string_view("BCEIMPQRWY")) add_token(std::string(1, c));
    for (char c = 'a'; c <= 'z'; ++c) add_token(std::string(1, c));
    add_token("{");
    add_token("}");
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int bos_id() const { return 0; }
  int eos_id() const { return 1; }
  int boxed_open_id() const { return 2; }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  std::optional<int> lookup(std::string_view tok) const {
    auto it = ids_.find(std::string(tok));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  // Greedy longest-match tokenization; throws tokenize_error naming the
  // first character that no token can represent.
  std::vector<int> encode(std::string_view text) const {
    std::vector<int> out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
      int matched = -1;
      std::size_t matched_len = 0;
      for (std::string_view m : {kEosMarker, kBosMarker, kBoxedOpenMarker}) {
        if (text.compare(pos, m.size(), m) == 0 && m.size() > matched_len) {
          matched = *lookup(m);
          matched_len = m.size();
        }
      }
      if (matched < 0) {
        const auto it = ids_.find(std::string(1, text[pos]));
        if (it == ids_.end()) {
          throw tokenize_error("character not in vocabulary: '" +
                               printable(text[pos]) + "' at offset " +
                               std::to_string(pos));
        }
        matched = it->second;
        matched_len = 1;
      }
      out.push_back(matched);
      pos += matched_len;
    }
    return out;
  }

  std::string decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) out += token(id);
    return out;
  }

  bool valid_id(int id) const { return id >= 0 && id < size(); }

 private:
  void add_token(std::string tok) {
    ids_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(std::move(tok));
  }

  static std::string printable(char c) {
    if (c == '\n') return "\\n";
    if (c == '\t') return "\\t";
    const auto u = static_cast<unsigned char>(c);
    if (u < 32 || u > 126) {
      static const char* hex = "0123456789abcdef";
      return std::string("\\x") + hex[u >> 4] + hex[u & 0xf];
    }
    return std::string(1, c);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace rise

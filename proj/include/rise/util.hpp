#pragma once

// Shared small utilities: string helpers, FNV-1a hashing, and a
// deterministic parallel_for whose results never depend on the thread count.

#include <atomic>
#include <cctype>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rise {

inline constexpr int kRunSchemaVersion = 1;

// Configuration problems (bad keys, invalid values, inconsistent modes).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem / serialization problems, message carries the file context.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text that cannot be expressed in the vocabulary.
class tokenize_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle_lower) {
  if (needle_lower.empty()) return false;
  return to_lower(haystack).find(needle_lower) != std::string::npos;
}

// Replaces the first occurrence of `slot` in `text`; throws if absent.
inline std::string replace_slot(std::string text, std::string_view slot,
                                std::string_view value) {
  const std::size_t pos = text.find(slot);
  if (pos == std::string::npos) {
    throw std::invalid_argument("template slot not found: " + std::string(slot));
  }
  text.replace(pos, slot.size(), value);
  return text;
}

// Runs fn(0..n-1) on up to `threads` workers. Tasks must write only to
// their own output slots; scheduling order is then irrelevant and the
// result is identical for every thread count, including 1.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(n, threads <= 1 ? 1 : static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rise

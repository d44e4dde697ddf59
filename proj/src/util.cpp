#include "fdi/util.hpp"

#include <cctype>

#include "fdi/error.hpp"

namespace fdi {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::empty_dataset: return "empty_dataset";
    case ErrorKind::unsplittable: return "unsplittable";
    case ErrorKind::parse: return "parse";
    case ErrorKind::stale_index: return "stale_index";
    case ErrorKind::over_budget: return "over_budget";
    case ErrorKind::unsatisfiable_state: return "unsatisfiable_state";
    case ErrorKind::exhausted_stream: return "exhausted_stream";
    case ErrorKind::no_update: return "no_update";
    case ErrorKind::model: return "model";
    case ErrorKind::remote: return "remote";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
  const std::string n = normalize_whitespace(needle);
  if (n.empty()) return true;
  return normalize_whitespace(haystack).find(n) != std::string::npos;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  // splitmix64 finalizer over the tag hash
  std::uint64_t z = seed ^ fnv1a64(tag);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fdi

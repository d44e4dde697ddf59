#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fdi {

/// 64-bit FNV-1a. Stable across platforms, used for sample ids and config hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

std::string hex64(std::uint64_t value);

/// Collapses every whitespace run to a single space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Substring test after whitespace normalization of both sides.
bool contains_normalized(std::string_view haystack, std::string_view needle);

/// Mixes a base seed with a stream tag so independent consumers never share a sequence.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

}  // namespace fdi

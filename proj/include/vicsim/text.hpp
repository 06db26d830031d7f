#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vicsim::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Whitespace tokenization after trimming. This is the word-count convention
// used by every length statistic.
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

// Lowercased token with leading/trailing non-alphanumeric characters removed.
// Internal apostrophes survive ("don't").
std::string strip_token(std::string_view token);

bool is_upper(char c);
bool is_lower(char c);
bool is_alpha(char c);
bool is_digit(char c);
bool is_alnum(char c);

std::size_t count_substr(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// 64-bit FNV-1a; stable across platforms, used for feature hashing.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace vicsim::text

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace moje::unicode {

/// Decodes UTF-8 into scalar values. Throws InputError on malformed input
/// (overlong forms, surrogates, truncated sequences, values above U+10FFFF).
std::vector<char32_t> decode(std::string_view utf8);

void append_utf8(std::string& out, char32_t cp);
std::string encode(char32_t cp);

/// Unicode general category P* (punctuation) or S* (symbol).
bool is_punct_or_symbol(char32_t cp);
bool is_whitespace(char32_t cp);
/// Simple (1:1) lowercase mapping; identity when none exists.
char32_t to_lower(char32_t cp);

}  // namespace moje::unicode

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace emomap::text {

/// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

/// ASCII lowercase; bytes >= 0x80 are left untouched.
std::string to_lower(std::string_view s);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s);

/// Replaces every invalid UTF-8 sequence with U+FFFD. Returns the number of
/// replacements made.
std::size_t sanitize_utf8(std::string& s);

/// Splits on any ASCII non-alphanumeric byte and lowercases. Bytes >= 0x80
/// are kept inside tokens so non-ASCII letters do not break words.
std::vector<std::string> word_tokens(std::string_view s);

/// Formats with a fixed number of decimals using the C locale.
std::string fixed(double value, int decimals);

}  // namespace emomap::text

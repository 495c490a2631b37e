#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 transcoding plus the handful of character properties the pipeline
// needs. Property lookups are backed by ICU; ASCII takes a fast path.
namespace cforge::unicode {

inline constexpr char32_t kReplacementChar = 0xFFFD;
inline constexpr char32_t kSoftHyphen = 0x00AD;

/// Decodes UTF-8, replacing every maximal invalid subsequence with U+FFFD.
std::u32string decode_lossy(std::string_view bytes);

bool is_valid_utf8(std::string_view bytes);

void append_utf8(std::string& out, char32_t cp);
std::string encode(std::u32string_view text);

/// Codepoint count of a valid UTF-8 string.
std::size_t length(std::string_view utf8);

/// Byte offset of each codepoint start, plus a final entry equal to size().
void codepoint_offsets(std::string_view utf8, std::vector<std::size_t>& offsets);

bool is_letter(char32_t c);            // general category L*
bool is_lowercase_letter(char32_t c);  // Ll
bool is_decimal_digit(char32_t c);     // Nd
bool is_whitespace(char32_t c);        // White_Space property
bool is_nonspacing_mark(char32_t c);   // Mn

/// Word-boundary punctuation for pre-tokenization: every ASCII
/// non-alphanumeric printable character and every Unicode P* character.
bool is_punctuation(char32_t c);

char32_t to_lower(char32_t c);

std::string lowercase(std::string_view utf8);

/// Canonical decomposition followed by removal of nonspacing marks,
/// e.g. "Șopârlița" -> "Soparlita".
std::string strip_accents(std::string_view utf8);

}  // namespace cforge::unicode

#include "cforge/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace cforge::unicode {
namespace {

struct Decoded {
  char32_t cp;
  std::size_t consumed;
  bool valid;
};

// Follows the "maximal subpart" practice: an ill-formed sequence consumes
// the longest prefix that could still have started a valid sequence.
Decoded decode_one(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1, true};

  std::size_t need = 0;
  char32_t cp = 0;
  unsigned char lo = 0x80;
  unsigned char hi = 0xBF;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    need = 1;
    cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    need = 2;
    cp = b0 & 0x0F;
    if (b0 == 0xE0) lo = 0xA0;
    if (b0 == 0xED) hi = 0x9F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    need = 3;
    cp = b0 & 0x07;
    if (b0 == 0xF0) lo = 0x90;
    if (b0 == 0xF4) hi = 0x8F;
  } else {
    return {kReplacementChar, 1, false};
  }

  std::size_t j = 1;
  for (; j <= need; ++j) {
    if (i + j >= s.size()) return {kReplacementChar, j, false};
    const auto b = static_cast<unsigned char>(s[i + j]);
    const unsigned char min = j == 1 ? lo : 0x80;
    const unsigned char max = j == 1 ? hi : 0xBF;
    if (b < min || b > max) return {kReplacementChar, j, false};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, j, true};
}

bool ascii(char32_t c) { return c < 0x80; }

}  // namespace

std::u32string decode_lossy(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size();) {
    const auto d = decode_one(bytes, i);
    out.push_back(d.cp);
    i += d.consumed;
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) {
  for (std::size_t i = 0; i < bytes.size();) {
    const auto d = decode_one(bytes, i);
    if (!d.valid) return false;
    i += d.consumed;
  }
  return true;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size() + text.size() / 4);
  for (char32_t c : text) append_utf8(out, c);
  return out;
}

std::size_t length(std::string_view utf8) {
  std::size_t n = 0;
  for (char c : utf8) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

void codepoint_offsets(std::string_view utf8, std::vector<std::size_t>& offsets) {
  offsets.clear();
  for (std::size_t i = 0; i < utf8.size(); ++i) {
    if ((static_cast<unsigned char>(utf8[i]) & 0xC0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(utf8.size());
}

bool is_letter(char32_t c) {
  if (ascii(c)) return (c | 0x20) >= 'a' && (c | 0x20) <= 'z';
  return u_isalpha(static_cast<UChar32>(c));
}

bool is_lowercase_letter(char32_t c) {
  if (ascii(c)) return c >= 'a' && c <= 'z';
  return u_charType(static_cast<UChar32>(c)) == U_LOWERCASE_LETTER;
}

bool is_decimal_digit(char32_t c) {
  if (ascii(c)) return c >= '0' && c <= '9';
  return u_isdigit(static_cast<UChar32>(c));
}

bool is_whitespace(char32_t c) {
  if (ascii(c)) return c == ' ' || (c >= 0x09 && c <= 0x0D);
  return u_isUWhiteSpace(static_cast<UChar32>(c));
}

bool is_nonspacing_mark(char32_t c) {
  if (ascii(c)) return false;
  return u_charType(static_cast<UChar32>(c)) == U_NON_SPACING_MARK;
}

bool is_punctuation(char32_t c) {
  if (ascii(c)) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
  }
  return u_ispunct(static_cast<UChar32>(c));
}

char32_t to_lower(char32_t c) {
  if (ascii(c)) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  return static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
}

std::string lowercase(std::string_view utf8) {
  std::string out;
  out.reserve(utf8.size());
  for (std::size_t i = 0; i < utf8.size();) {
    const auto d = decode_one(utf8, i);
    append_utf8(out, to_lower(d.cp));
    i += d.consumed;
  }
  return out;
}

std::string strip_accents(std::string_view utf8) {
  bool all_ascii = true;
  for (char c : utf8) {
    if (static_cast<unsigned char>(c) >= 0x80) {
      all_ascii = false;
      break;
    }
  }
  if (all_ascii) return std::string(utf8);

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFD normalizer unavailable");

  const auto source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  const icu::UnicodeString decomposed = nfd->normalize(source, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFD normalization failed");

  std::string out;
  out.reserve(utf8.size());
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 cp = decomposed.char32At(i);
    if (!is_nonspacing_mark(static_cast<char32_t>(cp))) {
      append_utf8(out, static_cast<char32_t>(cp));
    }
    i += U16_LENGTH(cp);
  }
  return out;
}

}  // namespace cforge::unicode

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace g2s::utf8 {

// Byte length of the code point starting at s[i]. Invalid lead bytes count as 1.
inline std::size_t char_length(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t n = 1;
  if (c >= 0xF0) {
    n = 4;
  } else if (c >= 0xE0) {
    n = 3;
  } else if (c >= 0xC0) {
    n = 2;
  }
  return i + n <= s.size() ? n : s.size() - i;
}

inline std::vector<std::string_view> chars(std::string_view s) {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t n = char_length(s, i);
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

inline bool is_space(std::string_view ch) {
  return ch.size() == 1 && (ch[0] == ' ' || ch[0] == '\t' || ch[0] == '\n' || ch[0] == '\r' ||
                            ch[0] == '\f' || ch[0] == '\v');
}

// ASCII letters, digits and underscore form contiguous "Latin" runs.
inline bool is_latin_word(std::string_view ch) {
  if (ch.size() != 1) return false;
  const char c = ch[0];
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool is_sentence_terminator(std::string_view ch) {
  return ch == "\xE3\x80\x82"     // 。
         || ch == "\xEF\xBC\x81"  // ！
         || ch == "\xEF\xBC\x9F"  // ？
         || ch == "!" || ch == "?" || ch == ".";
}

// True when every code point is punctuation-like: ASCII punctuation or one of
// the CJK/fullwidth punctuation blocks.
inline bool is_punctuation_token(std::string_view tok) {
  if (tok.empty()) return false;
  for (std::size_t i = 0; i < tok.size();) {
    const std::size_t n = char_length(tok, i);
    const auto b0 = static_cast<unsigned char>(tok[i]);
    bool punct = false;
    if (n == 1) {
      punct = (b0 >= 0x21 && b0 <= 0x2F) || (b0 >= 0x3A && b0 <= 0x40) ||
              (b0 >= 0x5B && b0 <= 0x60) || (b0 >= 0x7B && b0 <= 0x7E);
    } else if (n == 3) {
      const auto b1 = static_cast<unsigned char>(tok[i + 1]);
      // U+3000..U+303F CJK symbols and punctuation
      punct = (b0 == 0xE3 && b1 == 0x80);
      // U+FF01..U+FF0F, U+FF1A..U+FF20 fullwidth punctuation
      if (b0 == 0xEF && (b1 == 0xBC || b1 == 0xBD)) {
        const auto b2 = static_cast<unsigned char>(tok[i + 2]);
        const unsigned code = ((0x0Fu & b0) << 12) | ((0x3Fu & b1) << 6) | (0x3Fu & b2);
        punct = (code >= 0xFF01 && code <= 0xFF0F) || (code >= 0xFF1A && code <= 0xFF20) ||
                (code >= 0xFF3B && code <= 0xFF40) || (code >= 0xFF5B && code <= 0xFF65);
      }
      // U+2010..U+205E general punctuation (dashes, quotes, ellipsis)
      if (b0 == 0xE2 && (b1 == 0x80 || b1 == 0x81)) punct = true;
    }
    if (!punct) return false;
    i += n;
  }
  return true;
}

}  // namespace g2s::utf8

#include "spanft/text.hpp"

#include <unicode/uchar.h>

#include <cstdint>

#include "spanft/error.hpp"

namespace spanft {
namespace {

// Decodes one code point starting at text[pos]; advances pos. Rejects
// overlong forms, surrogates and values above U+10FFFF.
char32_t decode_one(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<std::uint8_t>(text[i]);
  };
  const std::size_t start = pos;
  const std::uint8_t b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  std::size_t len;
  char32_t cp;
  char32_t min;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    throw DecodeError(start, "invalid lead byte");
  }
  if (start + len > text.size()) throw DecodeError(start, "truncated sequence");
  for (std::size_t i = 1; i < len; ++i) {
    const std::uint8_t b = byte(start + i);
    if ((b & 0xC0) != 0x80) throw DecodeError(start + i, "invalid continuation byte");
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min) throw DecodeError(start, "overlong encoding");
  if (cp > 0x10FFFF) throw DecodeError(start, "code point out of range");
  if (cp >= 0xD800 && cp <= 0xDFFF) throw DecodeError(start, "surrogate code point");
  pos = start + len;
  return cp;
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

}  // namespace

void validate_utf8(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) decode_one(text, pos);
}

void normalize_words_into(std::string_view text, std::vector<std::string>& out) {
  out.clear();
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = decode_one(text, pos);
    // ASCII fast path; matches the ICU answers for these code points.
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      if (c == ' ' || (c >= '\t' && c <= '\r')) {
        flush();
      } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
        current.push_back(c);
      } else if (c >= 'A' && c <= 'Z') {
        current.push_back(static_cast<char>(c - 'A' + 'a'));
      } else if (u_ispunct(static_cast<UChar32>(cp))) {
        flush();
        out.emplace_back(1, c);
      } else {
        current.push_back(c);
      }
      continue;
    }
    const auto c = static_cast<UChar32>(cp);
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (u_ispunct(c)) {
      flush();
      std::string p;
      append_utf8(p, cp);
      out.push_back(std::move(p));
    } else {
      append_utf8(current, static_cast<char32_t>(u_tolower(c)));
    }
  }
  flush();
}

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> out;
  normalize_words_into(text, out);
  return out;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                       std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i != begin) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  return join_words(words, 0, words.size());
}

std::vector<std::string> split_words(std::string_view joined) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= joined.size()) {
    const std::size_t sp = joined.find(' ', start);
    const std::size_t end = sp == std::string_view::npos ? joined.size() : sp;
    out.emplace_back(joined.substr(start, end - start));
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return out;
}

}  // namespace spanft

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace spanft {

// Word normalization shared by dictionary building and segmentation:
//   * text is decoded as strict UTF-8 (DecodeError carries the byte offset),
//   * Unicode White_Space code points separate words,
//   * every punctuation code point (general category P*) is its own word,
//   * all other code points are lowercased with the simple case mapping.
// The result never contains empty words or whitespace.
std::vector<std::string> normalize_words(std::string_view text);

// As normalize_words, but appends into `out` (cleared first). Reuses the
// caller's buffers; hot path for corpus counting.
void normalize_words_into(std::string_view text, std::vector<std::string>& out);

// Throws DecodeError if `text` is not valid UTF-8.
void validate_utf8(std::string_view text);

// Joins words with a single ASCII space.
std::string join_words(const std::vector<std::string>& words,
                       std::size_t begin, std::size_t end);
std::string join_words(const std::vector<std::string>& words);

// Splits on single ASCII spaces (inverse of join_words for normalized words).
std::vector<std::string> split_words(std::string_view joined);

}  // namespace spanft

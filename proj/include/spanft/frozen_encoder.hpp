#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spanft/matrix.hpp"

namespace spanft {

// Stand-in for a pre-trained contextual encoder. Word vectors are hashed
// from (word, seed); each position then mixes in its neighbours.
struct ToyEncoderConfig {
  std::size_t d = 32;
  std::uint64_t seed = 42;
  double context_mix = 0.5;  // in [0, 1)

  void validate() const;
};

// Unit-norm hashed embedding of one word.
std::vector<double> toy_word_vector(std::string_view word, const ToyEncoderConfig& config);
// Unit-norm [CLS] vector; depends only on the seed.
std::vector<double> toy_cls_vector(const ToyEncoderConfig& config);

// (n + 1) x d contextual embeddings; row 0 is [CLS], row i + 1 belongs to
// words[i]. Throws EmptySentenceError for no words.
Matrix toy_encode(const std::vector<std::string>& words, const ToyEncoderConfig& config);

// SPFE container of per-sentence float32 matrices sharing a hidden size.
struct EmbeddingFile {
  std::uint32_t d = 0;
  std::vector<MatrixF> sentences;

  friend bool operator==(const EmbeddingFile&, const EmbeddingFile&) = default;
};

inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

void write_embeddings(std::ostream& out, const EmbeddingFile& file);
// FormatError on bad magic/version or trailing bytes, LengthError on
// truncation.
EmbeddingFile read_embeddings(std::istream& in);
void save_embeddings(const EmbeddingFile& file, const std::filesystem::path& path);
EmbeddingFile load_embeddings(const std::filesystem::path& path);

MatrixF to_float(const Matrix& m);
Matrix to_double(const MatrixF& m);

}  // namespace spanft

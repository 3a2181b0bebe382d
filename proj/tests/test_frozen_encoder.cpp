#include <cmath>
#include <sstream>

#include "doctest.h"
#include "spanft/error.hpp"
#include "spanft/frozen_encoder.hpp"

using namespace spanft;

namespace {

const std::vector<std::string> kWords{"span", "fine", "tuning", "works"};

std::string bytes_of(const EmbeddingFile& f) {
  std::ostringstream out;
  write_embeddings(out, f);
  return out.str();
}

}  // namespace

TEST_CASE("toy_encode is deterministic and unit norm") {
  ToyEncoderConfig cfg;
  const auto a = toy_encode(kWords, cfg);
  const auto b = toy_encode(kWords, cfg);
  CHECK(a == b);
  CHECK(a.rows() == kWords.size() + 1);
  CHECK(a.cols() == cfg.d);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double norm = 0;
    for (double v : a.row(i)) norm += v * v;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
  }
  const auto cls = toy_cls_vector(cfg);
  for (std::size_t j = 0; j < cfg.d; ++j) CHECK(a(0, j) == cls[j]);
}

TEST_CASE("context_mix zero keeps word vectors") {
  ToyEncoderConfig cfg;
  cfg.context_mix = 0.0;
  const auto t = toy_encode(kWords, cfg);
  for (std::size_t i = 0; i < kWords.size(); ++i) {
    const auto e = toy_word_vector(kWords[i], cfg);
    for (std::size_t j = 0; j < cfg.d; ++j) CHECK(t(i + 1, j) == e[j]);
  }
}

TEST_CASE("neighbours change the contextual vector") {
  ToyEncoderConfig cfg;
  const auto a = toy_encode({"new", "york"}, cfg);
  const auto b = toy_encode({"new", "jersey"}, cfg);
  bool differs = false;
  for (std::size_t j = 0; j < cfg.d; ++j) differs |= a(1, j) != b(1, j);
  CHECK(differs);
}

TEST_CASE("seeds change the output") {
  ToyEncoderConfig a, b;
  b.seed = 43;
  CHECK_FALSE(toy_encode(kWords, a) == toy_encode(kWords, b));
}

TEST_CASE("toy encoder errors") {
  CHECK_THROWS_AS(toy_encode({}, ToyEncoderConfig{}), EmptySentenceError);
  ToyEncoderConfig bad;
  bad.d = 1;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad.d = 8;
  bad.context_mix = 1.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("embedding file format") {
  EmbeddingFile f;
  f.d = 3;
  MatrixF m(2, 3);
  for (std::size_t i = 0; i < 6; ++i) m.data()[i] = 0.5f * static_cast<float>(i) - 1.0f;
  f.sentences.push_back(m);
  const std::string bytes = bytes_of(f);
  CHECK(bytes.size() == 16 + 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "SPFE");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 3);
  CHECK(bytes[12] == 1);
  CHECK(bytes[16] == 2);

  std::istringstream in(bytes);
  const auto back = read_embeddings(in);
  CHECK(back == f);
  CHECK(bytes_of(back) == bytes);
}

TEST_CASE("empty embedding file") {
  EmbeddingFile f;
  f.d = 4;
  std::istringstream in(bytes_of(f));
  const auto back = read_embeddings(in);
  CHECK(back.sentences.empty());
  CHECK(back.d == 4);
}

TEST_CASE("embedding file errors") {
  EmbeddingFile f;
  f.d = 2;
  f.sentences.push_back(MatrixF(1, 2));
  const std::string good = bytes_of(f);

  std::string magic = good;
  magic[0] = 'X';
  std::istringstream bad_magic(magic);
  CHECK_THROWS_AS(read_embeddings(bad_magic), FormatError);

  std::string version = good;
  version[4] = 2;
  std::istringstream bad_version(version);
  CHECK_THROWS_AS(read_embeddings(bad_version), FormatError);

  std::istringstream truncated(good.substr(0, good.size() - 1));
  CHECK_THROWS_AS(read_embeddings(truncated), LengthError);

  std::istringstream trailing(good + "x");
  CHECK_THROWS_AS(read_embeddings(trailing), FormatError);
}

#include "spanft/frozen_encoder.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "spanft/error.hpp"
#include "spanft/random.hpp"

namespace spanft {
namespace {

constexpr std::array<char, 4> kMagic = {'S', 'P', 'F', 'E'};

// Counter-mode expansion of a 64-bit key into d values in (-1, 1), then
// scaled to unit length.
std::vector<double> expand_unit(std::uint64_t key, std::size_t d) {
  std::vector<double> v(d);
  double sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const std::uint64_t x = mix64(key + (j + 1) * SplitMix64::kGamma);
    v[j] = (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-52 - 1.0;
    sq += v[j] * v[j];
  }
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF),
                         static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw LengthError(std::string("embedding file truncated while reading ") + what);
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void ToyEncoderConfig::validate() const {
  if (d < 2) throw ArgumentError("toy encoder hidden size must be >= 2");
  if (!(context_mix >= 0.0 && context_mix < 1.0)) {
    throw ArgumentError("context_mix must be in [0, 1)");
  }
}

std::vector<double> toy_word_vector(std::string_view word, const ToyEncoderConfig& config) {
  return expand_unit(hash_bytes(word, config.seed), config.d);
}

std::vector<double> toy_cls_vector(const ToyEncoderConfig& config) {
  // Words are never empty, so the empty key is reserved for [CLS].
  return expand_unit(hash_bytes({}, config.seed), config.d);
}

Matrix toy_encode(const std::vector<std::string>& words, const ToyEncoderConfig& config) {
  config.validate();
  if (words.empty()) throw EmptySentenceError();
  const std::size_t n = words.size();
  const std::size_t d = config.d;

  std::vector<std::vector<double>> e;
  e.reserve(n);
  for (const auto& w : words) e.push_back(toy_word_vector(w, config));

  Matrix t(n + 1, d);
  const auto cls = toy_cls_vector(config);
  std::copy(cls.begin(), cls.end(), t.row(0).begin());

  for (std::size_t i = 0; i < n; ++i) {
    auto row = t.row(i + 1);
    if (config.context_mix == 0.0) {
      std::copy(e[i].begin(), e[i].end(), row.begin());
      continue;
    }
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double prev = i > 0 ? e[i - 1][c] : 0.0;
      const double next = i + 1 < n ? e[i + 1][c] : 0.0;
      row[c] = e[i][c] + config.context_mix * (prev + next);
      sq += row[c] * row[c];
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
      for (double& x : row) x /= norm;
    } else {
      std::copy(e[i].begin(), e[i].end(), row.begin());
    }
  }
  return t;
}

void write_embeddings(std::ostream& out, const EmbeddingFile& file) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kEmbeddingFileVersion);
  put_u32(out, file.d);
  put_u32(out, static_cast<std::uint32_t>(file.sentences.size()));
  for (const MatrixF& m : file.sentences) {
    if (m.cols() != file.d) {
      throw ShapeError("sentence matrix has " + std::to_string(m.cols()) +
                       " columns, file hidden size is " + std::to_string(file.d));
    }
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    for (float x : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
}

EmbeddingFile read_embeddings(std::istream& in) {
  // Remaining payload, when the stream can tell; guards allocations against
  // corrupted row counts.
  std::streamoff available = -1;
  const std::streampos start = in.tellg();
  if (start != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    available = in.tellg() - start;
    in.seekg(start);
  }
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw LengthError("embedding file truncated in magic");
  if (magic != kMagic) throw FormatError("bad magic: not an SPFE embedding file");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kEmbeddingFileVersion) {
    throw FormatError("unsupported SPFE version " + std::to_string(version));
  }
  EmbeddingFile file;
  file.d = get_u32(in, "hidden size");
  const std::uint32_t count = get_u32(in, "sentence count");
  for (std::uint32_t s = 0; s < count; ++s) {
    const std::uint32_t m = get_u32(in, "row count");
    const auto bytes = static_cast<std::streamoff>(m) * file.d * 4;
    if (available >= 0 && (in.tellg() - start) + bytes > available) {
      throw LengthError("embedding file truncated in sentence " + std::to_string(s));
    }
    MatrixF mat(m, file.d);
    for (float& x : mat.data()) x = std::bit_cast<float>(get_u32(in, "matrix values"));
    file.sentences.push_back(std::move(mat));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after the last sentence");
  }
  return file;
}

void save_embeddings(const EmbeddingFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_embeddings(out, file);
  out.close();
  if (!out) throw Error("failed writing " + path.string());
}

EmbeddingFile load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_embeddings(in);
}

MatrixF to_float(const Matrix& m) {
  MatrixF out(m.rows(), m.cols());
  std::transform(m.data().begin(), m.data().end(), out.data().begin(),
                 [](double x) { return static_cast<float>(x); });
  return out;
}

Matrix to_double(const MatrixF& m) {
  Matrix out(m.rows(), m.cols());
  std::copy(m.data().begin(), m.data().end(), out.data().begin());
  return out;
}

}  // namespace spanft

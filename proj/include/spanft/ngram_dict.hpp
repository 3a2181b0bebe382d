#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spanft {

// A word n-gram of normalized tokens, 2 <= size() <= max_n.
class Ngram {
 public:
  // Normalizes each element of `words`; throws ArgumentError if the result
  // has fewer than 2 tokens.
  static Ngram from_words(const std::vector<std::string>& words);
  // Parses a space-joined canonical key. Throws ArgumentError when the key
  // is not canonical.
  static Ngram from_key(std::string_view key);

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  std::string key() const;

 private:
  explicit Ngram(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
  std::vector<std::string> tokens_;
};

struct NgramCount {
  std::string key;  // space-joined normalized tokens
  std::uint64_t count = 0;

  friend bool operator==(const NgramCount&, const NgramCount&) = default;
};

// Exact n-gram counts, sorted by ascending key (byte order).
struct CountTable {
  std::size_t max_n = 0;
  std::vector<NgramCount> entries;
};

struct CountOptions {
  std::size_t max_n = 5;
  // Tokens counted in memory before the shard is sorted and spilled to disk.
  // 0 disables spilling.
  std::size_t shard_budget = std::size_t{1} << 22;
  unsigned threads = 1;
  // Where spill files go; a fresh temporary directory when empty.
  std::filesystem::path spill_dir;
};

// Receives merged counts in ascending key order.
using CountSink = std::function<void(std::string_view key, std::uint64_t count)>;

// Streams every n-gram (2 <= n <= max_n, never crossing a line break) of the
// normalized corpus to `sink`, summed exactly across shards. Throws
// ArgumentError for max_n < 2 and DecodeError (with the byte offset in the
// stream) on invalid UTF-8. Returns the number of spill files written.
std::size_t count_ngrams_streaming(std::istream& corpus, const CountOptions& options,
                                   const CountSink& sink);

CountTable count_ngrams(std::istream& corpus, const CountOptions& options);
CountTable count_ngrams(std::istream& corpus, std::size_t max_n,
                        std::size_t shard_budget);

// Frequency-thresholded n-gram set. Immutable once built; concurrent
// read-only queries are safe.
class NgramDictionary {
 public:
  static constexpr std::size_t kDefaultMaxN = 5;
  static constexpr std::uint64_t kDefaultMinCount = 10;

  NgramDictionary() = default;
  // Validates every entry: canonical key, length in [2, max_n], count >=
  // min_count, no duplicates. Throws ArgumentError otherwise.
  NgramDictionary(std::size_t max_n, std::uint64_t min_count,
                  std::vector<NgramCount> entries,
                  std::string source_fingerprint = {});

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t max_n() const { return max_n_; }
  std::uint64_t min_count() const { return min_count_; }
  const std::string& source_fingerprint() const { return fingerprint_; }

  // Normalizes `tokens` and tests membership.
  bool contains(const std::vector<std::string>& tokens) const;
  // Membership of an already-normalized, space-joined key.
  bool contains_key(std::string_view key) const;
  std::optional<std::uint64_t> count(std::string_view key) const;

  // Entries ordered by descending count, then ascending key.
  std::vector<NgramCount> sorted_entries() const;

  // Entry-for-entry equality plus max_n and min_count. The fingerprint is
  // informational and not compared.
  friend bool operator==(const NgramDictionary& a, const NgramDictionary& b);

 private:
  struct KeyHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  using Map = std::unordered_map<std::string, std::uint64_t, KeyHash, std::equal_to<>>;

  std::size_t max_n_ = kDefaultMaxN;
  std::uint64_t min_count_ = kDefaultMinCount;
  Map entries_;
  std::string fingerprint_;
};

// Keeps exactly the entries with count >= min_count. min_count >= 1.
NgramDictionary build_dictionary(const CountTable& counts, std::uint64_t min_count,
                                 std::string source_fingerprint = {});

// Counts and thresholds in one pass over the merged stream, so only the
// surviving entries are held in memory.
NgramDictionary build_dictionary_from_corpus(std::istream& corpus,
                                             const CountOptions& options,
                                             std::uint64_t min_count,
                                             std::string source_fingerprint = {});

// Keeps the `target` highest-count entries; ties go to the smaller key.
NgramDictionary prune_to_size(const NgramDictionary& dict, std::size_t target);

// SPANDICT v1 text format.
void write_dictionary(std::ostream& out, const NgramDictionary& dict);
NgramDictionary read_dictionary(std::istream& in, std::string source_fingerprint = {});
void save_dictionary(const NgramDictionary& dict, const std::filesystem::path& path);
NgramDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace spanft

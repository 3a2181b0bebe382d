#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spanft/ngram_dict.hpp"

namespace spanft {

// A sentence as normalized words plus the text it came from.
struct WordSequence {
  std::vector<std::string> words;
  std::string raw;

  std::size_t size() const { return words.size(); }
};

// Throws EmptySentenceError when the text holds no words.
WordSequence normalize_and_tokenize(std::string_view text);

// Half-open index range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

// Empty when `spans` are sorted, contiguous, non-empty ranges covering
// [0, word_count) exactly; otherwise a description of the first violation.
std::string partition_violation(const std::vector<Span>& spans, std::size_t word_count);

// Grouping of a sentence's words into contiguous spans C_1..C_r.
class SpanPartition {
 public:
  SpanPartition() = default;
  // Throws ValidationError when the spans are not a partition of
  // [0, word_count).
  SpanPartition(std::vector<Span> spans, std::size_t word_count);

  static SpanPartition singletons(std::size_t word_count);

  const std::vector<Span>& spans() const { return spans_; }
  std::size_t size() const { return spans_.size(); }
  std::size_t word_count() const { return word_count_; }
  auto begin() const { return spans_.begin(); }
  auto end() const { return spans_.end(); }

  friend bool operator==(const SpanPartition&, const SpanPartition&) = default;

 private:
  std::vector<Span> spans_;
  std::size_t word_count_ = 0;
};

// Greedy longest match from the head of the sentence: at each cursor the
// longest dictionary n-gram starting there becomes a span, otherwise the
// single word does.
SpanPartition segment_greedy(const NgramDictionary& dict, const WordSequence& words);

// Span lengths drawn uniformly from [1, max_len] with splitmix64(seed); the
// last span is clipped at the sentence end.
SpanPartition segment_random(const WordSequence& words, std::uint64_t seed,
                             std::size_t max_len);

struct SegmentedSentence {
  WordSequence words;
  SpanPartition partition;
};

// JSON-lines segmentation records: {"tokens": [...], "spans": [[s, e], ...]}.
// Blank lines are skipped. Malformed JSON throws ParseError (line number);
// structural violations throw ValidationError (record number).
std::vector<SegmentedSentence> read_segmentation(std::istream& in,
                                                 const std::string& source = {});
std::vector<SegmentedSentence> load_external_segmentation(
    const std::filesystem::path& path);

// One JSON line without the trailing newline.
std::string segmentation_record(const WordSequence& words, const SpanPartition& partition);

// Per-word subword ranges of a tokenized sentence. ranges are relative to
// the first non-special subword; cls_offset special tokens precede them.
struct SubwordAlignment {
  std::vector<Span> ranges;
  std::size_t cls_offset = 0;

  // One subword per word.
  static SubwordAlignment identity(std::size_t word_count, std::size_t cls_offset);
};

// Maps word spans onto absolute subword ranges. Throws AlignmentError when
// the partition and the alignment disagree on the word count or the
// alignment is not contiguous.
std::vector<Span> project_to_subwords(const SpanPartition& partition,
                                      const SubwordAlignment& alignment);

struct SpanStats {
  std::size_t dict_size = 0;
  std::size_t sentences = 0;
  double average_spans = 0.0;
  std::map<std::size_t, std::size_t> histogram;  // span count -> sentences
};

// Blank lines are skipped; EmptyInputError when no sentence remains.
SpanStats span_stats(const std::vector<WordSequence>& sentences,
                     const NgramDictionary& dict);
SpanStats span_stats(std::istream& corpus, const NgramDictionary& dict);

// Reads every non-blank line of `corpus` as a sentence.
std::vector<WordSequence> read_sentences(std::istream& corpus);

// "dict_size\tavg_spans\tsentences" with avg_spans to 6 decimals.
std::string stats_row(const SpanStats& stats);
inline constexpr std::string_view kStatsHeader = "dict_size\tavg_spans\tsentences";

}  // namespace spanft

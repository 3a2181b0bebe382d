#include "spanft/segmenter.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>

#include "json.hpp"
#include "spanft/error.hpp"
#include "spanft/random.hpp"
#include "spanft/text.hpp"

namespace spanft {

WordSequence normalize_and_tokenize(std::string_view text) {
  WordSequence seq;
  seq.raw = std::string(text);
  normalize_words_into(text, seq.words);
  if (seq.words.empty()) throw EmptySentenceError();
  return seq;
}

std::string partition_violation(const std::vector<Span>& spans, std::size_t word_count) {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span& s = spans[i];
    if (s.start != cursor) {
      return "span " + std::to_string(i) + " starts at " + std::to_string(s.start) +
             ", expected " + std::to_string(cursor) +
             (s.start > cursor ? " (gap)" : " (overlap)");
    }
    if (s.end <= s.start) return "span " + std::to_string(i) + " is empty or reversed";
    cursor = s.end;
  }
  if (cursor != word_count) {
    return "spans cover " + std::to_string(cursor) + " of " + std::to_string(word_count) +
           " words";
  }
  return {};
}

SpanPartition::SpanPartition(std::vector<Span> spans, std::size_t word_count)
    : spans_(std::move(spans)), word_count_(word_count) {
  if (auto why = partition_violation(spans_, word_count_); !why.empty()) {
    throw ValidationError(0, why);
  }
}

SpanPartition SpanPartition::singletons(std::size_t word_count) {
  std::vector<Span> spans(word_count);
  for (std::size_t i = 0; i < word_count; ++i) spans[i] = {i, i + 1};
  return SpanPartition(std::move(spans), word_count);
}

SpanPartition segment_greedy(const NgramDictionary& dict, const WordSequence& words) {
  const std::size_t n = words.size();
  if (n == 0) throw EmptySentenceError();
  std::vector<Span> spans;
  std::string key;
  std::size_t p = 0;
  while (p < n) {
    std::size_t take = 1;
    if (!dict.empty()) {
      std::size_t len = std::min(dict.max_n(), n - p);
      if (len >= 2) {
        key = join_words(words.words, p, p + len);
        for (; len >= 2; --len) {
          if (dict.contains_key(key)) {
            take = len;
            break;
          }
          key.resize(key.size() - words.words[p + len - 1].size() - 1);
        }
      }
    }
    spans.push_back({p, p + take});
    p += take;
  }
  return SpanPartition(std::move(spans), n);
}

SpanPartition segment_random(const WordSequence& words, std::uint64_t seed,
                             std::size_t max_len) {
  if (max_len < 1) throw ArgumentError("max_len must be >= 1");
  const std::size_t n = words.size();
  if (n == 0) throw EmptySentenceError();
  SplitMix64 rng(seed);
  std::vector<Span> spans;
  std::size_t p = 0;
  while (p < n) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(max_len));
    const std::size_t end = std::min(n, p + len);
    spans.push_back({p, end});
    p = end;
  }
  return SpanPartition(std::move(spans), n);
}

std::vector<SegmentedSentence> read_segmentation(std::istream& in,
                                                 const std::string& source) {
  using nlohmann::json;
  std::vector<SegmentedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t record = out.size() + 1;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    const auto fail = [&](const std::string& why) {
      throw ValidationError(record, (source.empty() ? "" : source + ": ") + why);
    };
    if (!j.is_object() || !j.contains("tokens") || !j.contains("spans")) {
      fail("expected an object with \"tokens\" and \"spans\"");
    }
    const json& tokens = j["tokens"];
    const json& spans = j["spans"];
    if (!tokens.is_array() || !spans.is_array()) fail("\"tokens\" and \"spans\" must be arrays");

    SegmentedSentence sent;
    for (const auto& t : tokens) {
      if (!t.is_string() || t.get_ref<const std::string&>().empty()) {
        fail("tokens must be non-empty strings");
      }
      sent.words.words.push_back(t.get<std::string>());
    }
    if (sent.words.words.empty()) fail("empty sentence");
    sent.words.raw = join_words(sent.words.words);

    std::vector<Span> parsed;
    for (const auto& s : spans) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() ||
          !s[1].is_number_unsigned()) {
        fail("spans must be [start, end] pairs of non-negative integers");
      }
      parsed.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
    }
    if (auto why = partition_violation(parsed, sent.words.size()); !why.empty()) fail(why);
    sent.partition = SpanPartition(std::move(parsed), sent.words.size());
    out.push_back(std::move(sent));
  }
  return out;
}

std::vector<SegmentedSentence> load_external_segmentation(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_segmentation(in, path.string());
}

std::string segmentation_record(const WordSequence& words, const SpanPartition& partition) {
  nlohmann::ordered_json j;
  j["tokens"] = words.words;
  auto spans = nlohmann::ordered_json::array();
  for (const Span& s : partition) spans.push_back({s.start, s.end});
  j["spans"] = std::move(spans);
  return j.dump();
}

SubwordAlignment SubwordAlignment::identity(std::size_t word_count, std::size_t cls_offset) {
  SubwordAlignment a;
  a.cls_offset = cls_offset;
  a.ranges.resize(word_count);
  for (std::size_t i = 0; i < word_count; ++i) a.ranges[i] = {i, i + 1};
  return a;
}

std::vector<Span> project_to_subwords(const SpanPartition& partition,
                                      const SubwordAlignment& alignment) {
  const auto& ranges = alignment.ranges;
  if (partition.word_count() != ranges.size()) {
    throw AlignmentError("partition covers " + std::to_string(partition.word_count()) +
                         " words but the alignment describes " +
                         std::to_string(ranges.size()));
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const std::size_t expected = i == 0 ? 0 : ranges[i - 1].end;
    if (ranges[i].start != expected || ranges[i].end <= ranges[i].start) {
      throw AlignmentError("alignment range for word " + std::to_string(i) +
                           " is not contiguous and non-empty");
    }
  }
  std::vector<Span> out;
  out.reserve(partition.size());
  for (const Span& s : partition) {
    out.push_back({ranges[s.start].start + alignment.cls_offset,
                   ranges[s.end - 1].end + alignment.cls_offset});
  }
  return out;
}

std::vector<WordSequence> read_sentences(std::istream& corpus) {
  std::vector<WordSequence> out;
  std::string line;
  while (std::getline(corpus, line)) {
    WordSequence seq;
    normalize_words_into(line, seq.words);
    if (seq.words.empty()) continue;
    seq.raw = std::move(line);
    out.push_back(std::move(seq));
  }
  return out;
}

SpanStats span_stats(const std::vector<WordSequence>& sentences,
                     const NgramDictionary& dict) {
  SpanStats stats;
  stats.dict_size = dict.size();
  std::size_t total = 0;
  for (const auto& s : sentences) {
    if (s.words.empty()) continue;
    const std::size_t spans = segment_greedy(dict, s).size();
    total += spans;
    ++stats.histogram[spans];
    ++stats.sentences;
  }
  if (stats.sentences == 0) throw EmptyInputError("span statistics need at least one sentence");
  stats.average_spans = static_cast<double>(total) / static_cast<double>(stats.sentences);
  return stats;
}

SpanStats span_stats(std::istream& corpus, const NgramDictionary& dict) {
  return span_stats(read_sentences(corpus), dict);
}

std::string stats_row(const SpanStats& stats) {
  char avg[64];
  std::snprintf(avg, sizeof avg, "%.6f", stats.average_spans);
  return std::to_string(stats.dict_size) + '\t' + avg + '\t' + std::to_string(stats.sentences);
}

}  // namespace spanft

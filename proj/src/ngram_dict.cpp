#include "spanft/ngram_dict.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "spanft/error.hpp"
#include "spanft/text.hpp"

namespace spanft {

namespace {

bool by_count_then_key(const NgramCount& a, const NgramCount& b) {
  if (a.count != b.count) return a.count > b.count;
  return a.key < b.key;
}

// Empty string when `key` is canonical with 2..max_n tokens, else the reason.
std::string check_key(std::string_view key, std::size_t max_n) {
  std::vector<std::string> words;
  try {
    normalize_words_into(key, words);
  } catch (const DecodeError& e) {
    return e.what();
  }
  if (join_words(words) != key) return "key is not normalized: '" + std::string(key) + "'";
  if (words.size() < 2) return "n-gram needs at least 2 tokens: '" + std::string(key) + "'";
  if (words.size() > max_n) {
    return "n-gram longer than max_n=" + std::to_string(max_n) + ": '" +
           std::string(key) + "'";
  }
  return {};
}

bool parse_uint(std::string_view text, std::uint64_t& value) {
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Ngram Ngram::from_words(const std::vector<std::string>& words) {
  auto tokens = normalize_words(join_words(words));
  if (tokens.size() < 2) throw ArgumentError("an n-gram needs at least 2 tokens");
  return Ngram(std::move(tokens));
}

Ngram Ngram::from_key(std::string_view key) {
  auto tokens = normalize_words(key);
  if (tokens.size() < 2 || join_words(tokens) != key) {
    throw ArgumentError("not a canonical n-gram key: '" + std::string(key) + "'");
  }
  return Ngram(std::move(tokens));
}

std::string Ngram::key() const { return join_words(tokens_); }

NgramDictionary::NgramDictionary(std::size_t max_n, std::uint64_t min_count,
                                 std::vector<NgramCount> entries,
                                 std::string source_fingerprint)
    : max_n_(max_n), min_count_(min_count), fingerprint_(std::move(source_fingerprint)) {
  if (max_n < 2) throw ArgumentError("max_n must be >= 2");
  if (min_count < 1) throw ArgumentError("min_count must be >= 1");
  entries_.reserve(entries.size());
  for (auto& e : entries) {
    if (auto why = check_key(e.key, max_n); !why.empty()) throw ArgumentError(why);
    if (e.count < min_count) {
      throw ArgumentError("count " + std::to_string(e.count) + " below min_count for '" +
                          e.key + "'");
    }
    if (!entries_.try_emplace(std::move(e.key), e.count).second) {
      throw ArgumentError("duplicate n-gram '" + e.key + "'");
    }
  }
}

bool NgramDictionary::contains(const std::vector<std::string>& tokens) const {
  if (entries_.empty()) return false;
  return contains_key(join_words(normalize_words(join_words(tokens))));
}

bool NgramDictionary::contains_key(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::optional<std::uint64_t> NgramDictionary::count(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<NgramCount> NgramDictionary::sorted_entries() const {
  std::vector<NgramCount> out;
  out.reserve(entries_.size());
  for (const auto& [key, count] : entries_) out.push_back({key, count});
  std::sort(out.begin(), out.end(), by_count_then_key);
  return out;
}

bool operator==(const NgramDictionary& a, const NgramDictionary& b) {
  return a.max_n_ == b.max_n_ && a.min_count_ == b.min_count_ && a.entries_ == b.entries_;
}

NgramDictionary build_dictionary(const CountTable& counts, std::uint64_t min_count,
                                 std::string source_fingerprint) {
  if (min_count < 1) throw ArgumentError("min_count must be >= 1");
  std::vector<NgramCount> kept;
  for (const auto& e : counts.entries) {
    if (e.count >= min_count) kept.push_back(e);
  }
  return NgramDictionary(counts.max_n, min_count, std::move(kept),
                         std::move(source_fingerprint));
}

NgramDictionary build_dictionary_from_corpus(std::istream& corpus,
                                             const CountOptions& options,
                                             std::uint64_t min_count,
                                             std::string source_fingerprint) {
  if (min_count < 1) throw ArgumentError("min_count must be >= 1");
  std::vector<NgramCount> kept;
  count_ngrams_streaming(corpus, options, [&](std::string_view key, std::uint64_t count) {
    if (count >= min_count) kept.push_back({std::string(key), count});
  });
  return NgramDictionary(options.max_n, min_count, std::move(kept),
                         std::move(source_fingerprint));
}

NgramDictionary prune_to_size(const NgramDictionary& dict, std::size_t target) {
  if (target >= dict.size()) return dict;
  auto entries = dict.sorted_entries();
  entries.resize(target);
  return NgramDictionary(dict.max_n(), dict.min_count(), std::move(entries),
                         dict.source_fingerprint());
}

void write_dictionary(std::ostream& out, const NgramDictionary& dict) {
  out << "SPANDICT v1 max_n=" << dict.max_n() << " min_count=" << dict.min_count() << '\n';
  for (const auto& e : dict.sorted_entries()) out << e.count << '\t' << e.key << '\n';
}

NgramDictionary read_dictionary(std::istream& in, std::string source_fingerprint) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing SPANDICT header");

  constexpr std::string_view kMagic = "SPANDICT ";
  if (line.rfind(kMagic, 0) != 0) {
    throw ParseError(1, "not a SPANDICT file (bad header or version)");
  }
  const std::string_view rest = std::string_view(line).substr(kMagic.size());
  const auto sp = rest.find(' ');
  const std::string_view version = rest.substr(0, sp);
  if (version != "v1") {
    throw VersionError("line 1: unsupported SPANDICT version '" + std::string(version) +
                       "' (expected v1)");
  }
  std::uint64_t max_n = 0;
  std::uint64_t min_count = 0;
  {
    constexpr std::string_view kMaxN = "max_n=";
    constexpr std::string_view kMinCount = " min_count=";
    const std::string_view fields =
        sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
    const auto mc = fields.find(kMinCount);
    if (fields.rfind(kMaxN, 0) != 0 || mc == std::string_view::npos ||
        !parse_uint(fields.substr(kMaxN.size(), mc - kMaxN.size()), max_n) ||
        !parse_uint(fields.substr(mc + kMinCount.size()), min_count)) {
      throw ParseError(1, "malformed header, expected 'SPANDICT v1 max_n=<int> min_count=<int>'");
    }
    if (max_n < 2) throw ParseError(1, "max_n must be >= 2");
    if (min_count < 1) throw ParseError(1, "min_count must be >= 1");
  }

  std::vector<NgramCount> entries;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected '<count>\\t<n-gram>'");
    std::uint64_t count = 0;
    if (!parse_uint(std::string_view(line).substr(0, tab), count) || count == 0) {
      throw ParseError(line_no, "bad count field '" + line.substr(0, tab) + "'");
    }
    std::string key = line.substr(tab + 1);
    if (auto why = check_key(key, max_n); !why.empty()) throw ParseError(line_no, why);
    if (count < min_count) {
      throw ParseError(line_no, "count " + std::to_string(count) + " below min_count");
    }
    if (!seen.emplace(key, line_no).second) {
      throw ParseError(line_no, "duplicate n-gram '" + key + "'");
    }
    entries.push_back({std::move(key), count});
  }
  return NgramDictionary(max_n, min_count, std::move(entries), std::move(source_fingerprint));
}

void save_dictionary(const NgramDictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_dictionary(out, dict);
  out.close();
  if (!out) throw Error("failed writing " + path.string());
}

NgramDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_dictionary(in, "file:" + path.string());
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e.line(), e.detail());
  }
}

}  // namespace spanft

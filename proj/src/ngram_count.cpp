#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <queue>
#include <thread>
#include <unordered_map>

#include "spanft/error.hpp"
#include "spanft/ngram_dict.hpp"
#include "spanft/text.hpp"

namespace spanft {
namespace fs = std::filesystem;

namespace {

// Owns a unique scratch directory for spill files; removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const fs::path& parent) {
    const fs::path base = parent.empty() ? fs::temp_directory_path() : parent;
    fs::create_directories(base);
    std::string templ = (base / "spanft-spill-XXXXXX").string();
    if (::mkdtemp(templ.data()) == nullptr) {
      throw Error("cannot create spill directory under " + base.string());
    }
    path_ = templ;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Counts one worker's share of the corpus, spilling sorted runs whenever the
// in-memory shard reaches the token budget.
class ShardCounter {
 public:
  ShardCounter(std::size_t max_n, std::size_t budget, fs::path dir, std::string tag)
      : max_n_(max_n), budget_(budget), dir_(std::move(dir)), tag_(std::move(tag)) {}

  // `offset` is the byte offset of the line within the whole stream.
  void add_line(std::string_view line, std::size_t offset) {
    try {
      normalize_words_into(line, words_);
    } catch (const DecodeError& e) {
      throw DecodeError(offset + e.byte_offset(), e.reason());
    }
    const std::size_t n = words_.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      key_ = words_[i];
      for (std::size_t len = 2; len <= max_n_ && i + len <= n; ++len) {
        key_.push_back(' ');
        key_ += words_[i + len - 1];
        ++counts_[key_];
      }
    }
    tokens_ += n;
    if (budget_ != 0 && tokens_ >= budget_) spill();
  }

  void spill() {
    tokens_ = 0;
    if (counts_.empty()) return;
    const auto sorted = take_sorted();
    fs::path path = dir_ / (tag_ + "-" + std::to_string(runs_.size()) + ".run");
    std::ofstream out(path, std::ios::binary);
    for (const auto& [key, count] : sorted) out << key << '\t' << count << '\n';
    out.close();
    if (!out) throw Error("failed writing spill file " + path.string());
    runs_.push_back(std::move(path));
  }

  std::vector<NgramCount> take_sorted() {
    std::vector<NgramCount> sorted;
    sorted.reserve(counts_.size());
    for (auto& [key, count] : counts_) sorted.push_back({key, count});
    counts_.clear();
    std::sort(sorted.begin(), sorted.end(),
              [](const NgramCount& a, const NgramCount& b) { return a.key < b.key; });
    return sorted;
  }

  const std::vector<fs::path>& runs() const { return runs_; }

 private:
  std::size_t max_n_;
  std::size_t budget_;
  fs::path dir_;
  std::string tag_;
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::vector<fs::path> runs_;
  std::vector<std::string> words_;
  std::string key_;
  std::size_t tokens_ = 0;
};

// One sorted input of the k-way merge: a spill file or an in-memory shard.
class RunSource {
 public:
  explicit RunSource(const fs::path& path) : file_(path, std::ios::binary) {
    if (!file_) throw Error("cannot reopen spill file " + path.string());
    advance();
  }
  explicit RunSource(std::vector<NgramCount> rows) : rows_(std::move(rows)) {
    advance();
  }

  bool done() const { return done_; }
  const std::string& key() const { return key_; }
  std::uint64_t count() const { return count_; }

  void advance() {
    if (file_.is_open()) {
      std::string line;
      if (!std::getline(file_, line)) {
        done_ = true;
        return;
      }
      const auto tab = line.rfind('\t');
      key_ = line.substr(0, tab);
      count_ = std::strtoull(line.c_str() + tab + 1, nullptr, 10);
      return;
    }
    if (next_ == rows_.size()) {
      done_ = true;
      return;
    }
    key_ = std::move(rows_[next_].key);
    count_ = rows_[next_].count;
    ++next_;
  }

 private:
  std::ifstream file_;
  std::vector<NgramCount> rows_;
  std::size_t next_ = 0;
  std::string key_;
  std::uint64_t count_ = 0;
  bool done_ = false;
};

void merge_sources(std::vector<RunSource>& sources, const CountSink& sink) {
  const auto greater = [&](std::size_t a, std::size_t b) {
    return sources[a].key() > sources[b].key();
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(
      greater);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!sources[i].done()) heap.push(i);
  }
  std::string key;
  while (!heap.empty()) {
    std::size_t top = heap.top();
    heap.pop();
    key = sources[top].key();
    std::uint64_t total = 0;
    for (;;) {
      total += sources[top].count();
      sources[top].advance();
      if (!sources[top].done()) heap.push(top);
      if (heap.empty() || sources[heap.top()].key() != key) break;
      top = heap.top();
      heap.pop();
    }
    sink(key, total);
  }
}

}  // namespace

std::size_t count_ngrams_streaming(std::istream& corpus, const CountOptions& options,
                                   const CountSink& sink) {
  if (options.max_n < 2) throw ArgumentError("max_n must be >= 2");
  const unsigned threads = std::max(1U, options.threads);
  ScratchDir scratch(options.spill_dir);

  std::vector<ShardCounter> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back(options.max_n, options.shard_budget, scratch.path(),
                         "w" + std::to_string(t));
  }

  std::size_t offset = 0;
  std::string line;
  if (threads == 1) {
    while (std::getline(corpus, line)) {
      workers[0].add_line(line, offset);
      offset += line.size() + 1;
    }
  } else {
    // Lines are read in batches; each worker takes a contiguous slice. Sums
    // are order-independent, so the merged result matches the serial path.
    constexpr std::size_t kBatchLines = 1 << 14;
    std::vector<std::string> batch;
    std::vector<std::size_t> offsets;
    bool more = true;
    while (more) {
      batch.clear();
      offsets.clear();
      while (batch.size() < kBatchLines && std::getline(corpus, line)) {
        offsets.push_back(offset);
        offset += line.size() + 1;
        batch.push_back(std::move(line));
      }
      more = batch.size() == kBatchLines;
      if (batch.empty()) break;
      const std::size_t per = (batch.size() + threads - 1) / threads;
      std::vector<std::exception_ptr> errors(threads);
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            const std::size_t lo = std::min(batch.size(), t * per);
            const std::size_t hi = std::min(batch.size(), lo + per);
            for (std::size_t i = lo; i < hi; ++i) workers[t].add_line(batch[i], offsets[i]);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
      }
    }
  }

  std::size_t spills = 0;
  std::vector<RunSource> sources;
  for (auto& w : workers) {
    spills += w.runs().size();
    for (const auto& run : w.runs()) sources.emplace_back(run);
    sources.emplace_back(w.take_sorted());
  }
  merge_sources(sources, sink);
  return spills;
}

CountTable count_ngrams(std::istream& corpus, const CountOptions& options) {
  CountTable table;
  table.max_n = options.max_n;
  count_ngrams_streaming(corpus, options, [&](std::string_view key, std::uint64_t count) {
    table.entries.push_back({std::string(key), count});
  });
  return table;
}

CountTable count_ngrams(std::istream& corpus, std::size_t max_n, std::size_t shard_budget) {
  CountOptions options;
  options.max_n = max_n;
  options.shard_budget = shard_budget;
  return count_ngrams(corpus, options);
}

}  // namespace spanft

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criterion 2 needs a large corpus and is skipped unless
// SPANFT_WIKITEXT points at one.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spanft/eval_stats.hpp"
#include "spanft/frozen_encoder.hpp"
#include "spanft/ngram_dict.hpp"
#include "spanft/random.hpp"
#include "spanft/segmenter.hpp"
#include "spanft/span_encoder.hpp"
#include "spanft/trainer.hpp"

using namespace spanft;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Status::pass : Status::fail, std::move(detail)};
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 1. Sharded counting with spills equals a single-pass map on 20 corpora.
Outcome counting_oracle() {
  std::size_t mismatches = 0, total_keys = 0, spills = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    // Sizes from 8 KB up to 1 MB.
    const auto bytes = static_cast<std::size_t>(8192.0 * std::pow(128.0, i / 19.0));
    const std::string corpus = oracle::random_corpus(1000 + i, std::min<std::size_t>(bytes, 1000000), 200 + 50 * i);
    CountOptions opt;
    opt.max_n = 2 + i % 4;
    opt.shard_budget = 2000 + 1000 * i;
    opt.threads = static_cast<unsigned>(1 + i % 3);
    std::istringstream in(corpus);
    std::vector<NgramCount> got;
    spills += count_ngrams_streaming(in, opt, [&](std::string_view k, std::uint64_t c) {
      got.push_back({std::string(k), c});
    });
    const auto want = oracle::count_ngrams(corpus, opt.max_n);
    total_keys += want.size();
    if (got.size() != want.size()) {
      ++mismatches;
      continue;
    }
    auto it = want.begin();
    for (const auto& e : got) {
      if (e.key != it->first || e.count != it->second) {
        ++mismatches;
        break;
      }
      ++it;
    }
  }
  return verdict(mismatches == 0, "20 corpora, " + std::to_string(total_keys) + " distinct n-grams, " +
                                      std::to_string(spills) + " spill files, " +
                                      std::to_string(mismatches) + " mismatching corpora");
}

// 2. Large-corpus dictionary size.
Outcome wikitext_dictionary() {
  const char* path = std::getenv("SPANFT_WIKITEXT");
  if (path == nullptr || !fs::exists(path)) {
    return {Status::skip, "set SPANFT_WIKITEXT to the wikitext-103 training text to run"};
  }
  std::ifstream in(path, std::ios::binary);
  CountOptions opt;
  opt.max_n = 5;
  opt.threads = 1;
  const auto dict = build_dictionary_from_corpus(in, opt, 10, path);
  return verdict(dict.size() >= 400000, "size " + std::to_string(dict.size()) + " (need >= 400000)");
}

// 3. Greedy segmentation against an independent oracle.
Outcome segmenter_oracle() {
  SplitMix64 rng(3);
  std::size_t disagreements = 0, violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t max_n = 2 + rng.below(4);
    const std::size_t vocab = 3 + rng.below(8);
    std::set<std::string> keys;
    const std::size_t want = rng.below(60);
    for (std::size_t tries = 0; keys.size() < want && tries < 500; ++tries) {
      const std::size_t n = 2 + rng.below(max_n - 1);
      std::string key = "v" + std::to_string(rng.below(vocab));
      for (std::size_t j = 1; j < n; ++j) key += " v" + std::to_string(rng.below(vocab));
      keys.insert(key);
    }
    std::vector<NgramCount> entries;
    for (const auto& k : keys) entries.push_back({k, 1 + rng.below(20)});
    const NgramDictionary dict(max_n, 1, entries);

    std::string text;
    const std::size_t len = 1 + rng.below(40);
    for (std::size_t i = 0; i < len; ++i) {
      // Mixed case exercises normalization on the way in.
      text += (rng.below(4) == 0 ? "V" : "v") + std::to_string(rng.below(vocab)) + " ";
    }
    const auto words = normalize_and_tokenize(text);
    const auto p = segment_greedy(dict, words);
    if (p.spans() != oracle::greedy(keys, max_n, words.words)) ++disagreements;
    bool ok = partition_violation(p.spans(), words.size()).empty();
    for (const Span& s : p) {
      if (s.size() > 1 && !dict.contains_key(join_words(words.words, s.start, s.end))) ok = false;
    }
    if (!ok) ++violations;
  }
  return verdict(disagreements == 0 && violations == 0,
                 "1000 pairs, " + std::to_string(disagreements) + " oracle disagreements, " +
                     std::to_string(violations) + " invariant violations");
}

// 4. Finite-difference gradient check over the full grid.
Outcome gradient_grid() {
  double worst = 0.0;
  std::string where;
  std::size_t runs = 0, failures = 0;
  for (Variant v : kAllVariants) {
    for (std::size_t d : {2, 3, 5}) {
      for (std::size_t r : {1, 2, 4}) {
        for (std::size_t l : {1, 3, 5}) {
          GradCheckOptions o;
          o.variant = v;
          o.d = d;
          o.r = r;
          o.l = l;
          o.k = 3;
          o.epsilon = 1e-5;
          o.tolerance = 1e-4;
          o.seed = 42 + runs;
          const auto rep = grad_check(o);
          ++runs;
          if (!rep.passed) ++failures;
          if (rep.max_relative_error > worst) {
            worst = rep.max_relative_error;
            where = std::string(variant_name(v)) + " d=" + std::to_string(d) + " r=" +
                    std::to_string(r) + " l=" + std::to_string(l) + " " + rep.worst;
          }
        }
      }
    }
  }
  return verdict(failures == 0 && worst < 1e-4,
                 std::to_string(runs) + " configurations, max relative error " + fmt(worst, 3) +
                     " (" + where + "), tolerance 1e-4");
}

// 5. Extra masked slots leave s* bit-identical.
Outcome padding_invariance() {
  SplitMix64 rng(5);
  std::size_t differing = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(8);
    const std::size_t n = 1 + rng.below(20);
    Matrix t(n + 1, d);
    for (double& x : t.data()) x = rng.uniform(-1, 1);
    WordSequence w;
    w.words.assign(n, "x");
    const auto bounds = project_to_subwords(segment_random(w, rng.next(), 5),
                                            SubwordAlignment::identity(n, 1));
    const auto params = EncoderParams::uniform(d, 3, rng.next(), 0.3);
    const Variant v = kAllVariants[trial % 4];
    const SpanLayout base{1 + rng.below(bounds.size()), 1 + rng.below(5)};
    const SpanLayout wide{base.r + 1 + rng.below(8), base.l + 1 + rng.below(8)};
    // Only the spans and tokens that survive the smaller layout are kept, so
    // the wider layout adds padding and nothing else.
    std::vector<Span> kept(bounds.begin(), bounds.begin() + static_cast<long>(base.r));
    for (Span& s : kept) s.end = std::min(s.end, s.start + base.l);
    const auto a = forward(t, kept, params, v, base).representation;
    const auto b = forward(t, kept, params, v, wide).representation;
    if (a != b) ++differing;
  }
  return verdict(differing == 0, "100 cases, " + std::to_string(differing) + " differ");
}

// 6. Phrase detection: label is whether a dictionary bigram occurs.
struct PhraseTask {
  NgramDictionary dict;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
};

PhraseTask make_phrase_task(std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::string> vocab;
  for (int i = 0; i < 200; ++i) vocab.push_back("w" + std::to_string(i));
  std::set<std::pair<std::size_t, std::size_t>> bigrams;
  while (bigrams.size() < 30) {
    const std::size_t a = rng.below(vocab.size());
    const std::size_t b = rng.below(vocab.size());
    if (a != b) bigrams.insert({a, b});
  }
  std::vector<NgramCount> entries;
  for (const auto& [a, b] : bigrams) entries.push_back({vocab[a] + " " + vocab[b], 10});
  PhraseTask task{NgramDictionary(2, 10, entries), {}, {}};
  std::vector<std::size_t> phrase_words;
  for (const auto& [a, b] : bigrams) {
    phrase_words.push_back(a);
    phrase_words.push_back(b);
  }

  const auto has_bigram = [&](const std::vector<std::size_t>& s) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      if (bigrams.count({s[i], s[i + 1]})) return true;
    }
    return false;
  };
  for (int i = 0; i < 2000; ++i) {
    const bool positive = i % 2 == 0;
    std::vector<std::size_t> s;
    do {
      s.clear();
      const std::size_t len = 6 + rng.below(7);
      for (std::size_t j = 0; j < len; ++j) {
        // Phrase words also appear on their own so single words carry no label.
        s.push_back(rng.below(3) == 0 ? phrase_words[rng.below(phrase_words.size())]
                                      : rng.below(vocab.size()));
      }
      if (positive) {
        auto it = bigrams.begin();
        std::advance(it, static_cast<long>(rng.below(bigrams.size())));
        const std::size_t at = rng.below(s.size() - 1);
        s[at] = it->first;
        s[at + 1] = it->second;
      }
    } while (has_bigram(s) != positive);
    std::string text;
    for (std::size_t w : s) text += (text.empty() ? "" : " ") + vocab[w];
    LabeledExample ex{text, std::nullopt, std::nullopt, positive ? 1u : 0u};
    (i < 1600 ? task.train : task.dev).push_back(std::move(ex));
  }
  return task;
}

Outcome phrase_task() {
  const auto task = make_phrase_task(42);
  Segmenter seg;
  seg.dict = &task.dict;
  ToyEncoderConfig encoder;
  encoder.d = 32;
  encoder.seed = 42;

  TrainConfig cfg;
  cfg.seed = 42;
  cfg.variant = Variant::cnn_cnn;
  cfg.layout = {16, 8};
  cfg.max_epochs = 5;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 16;
  const auto span_run = train(task.train, task.dev, seg, encoder, cfg);

  cfg.head_input = HeadInput::cls_only;
  const auto cls_run = train(task.train, task.dev, seg, encoder, cfg);

  double best_span = 0.0;
  for (const auto& m : span_run.history) best_span = std::max(best_span, m.dev_accuracy);
  const double span_acc = span_run.history.back().dev_accuracy;
  const double cls_acc = cls_run.history.back().dev_accuracy;
  const bool ok = span_acc >= 0.95 && span_acc - cls_acc >= 0.10;
  return verdict(ok, "span (cnn_cnn) dev accuracy " + fmt(span_acc, 4) + " after " +
                         std::to_string(span_run.history.size()) + " epochs, CLS-only " +
                         fmt(cls_acc, 4) + ", gap " + fmt(100 * (span_acc - cls_acc), 4) +
                         " points (need >= 0.95 and >= 10)");
}

// 7. McNemar oracle value and brute-force agreement.
Outcome mcnemar() {
  const double p = mcnemar_test(10, 2).p_value;
  std::size_t mismatches = 0;
  for (std::uint64_t n = 0; n <= 12; ++n) {
    for (std::uint64_t b = 0; b <= n; ++b) {
      const std::uint64_t c = n - b;
      std::uint64_t extreme = 0;
      for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
        const auto k = static_cast<std::uint64_t>(__builtin_popcountll(mask));
        if (std::min(k, n - k) <= std::min(b, c)) ++extreme;
      }
      const double brute = std::ldexp(static_cast<double>(extreme), -static_cast<int>(n));
      if (std::abs(mcnemar_test(b, c).p_value - std::min(1.0, brute)) > 1e-15) ++mismatches;
    }
  }
  return verdict(std::abs(p - 0.038574) <= 1e-4 && mismatches == 0,
                 "b=10 c=2 p=" + fmt(p, 8) + " (expect 0.038574 +- 1e-4), " +
                     std::to_string(mismatches) + " brute-force mismatches for b+c <= 12");
}

// 8. Span counts fall as the dictionary grows, on the bundled sample.
Outcome dictionary_curve() {
  const fs::path data = SPANFT_DATA_DIR;
  std::ifstream corpus(data / "sample.txt", std::ios::binary);
  if (!corpus) return {Status::fail, "missing " + (data / "sample.txt").string()};
  const auto sentences = read_sentences(corpus);
  corpus.clear();
  corpus.seekg(0);
  CountOptions opt;
  opt.max_n = 5;
  const auto full = build_dictionary_from_corpus(corpus, opt, 2);
  const auto empty = span_stats(sentences, NgramDictionary());
  const auto with_full = span_stats(sentences, full);

  std::ostringstream report;
  report << kStatsHeader << "\n";
  std::size_t previous_size = 0;
  double previous_avg = INFINITY;
  bool monotone = true;
  for (std::size_t size : {0ul, 1000ul, 10000ul, 100000ul}) {
    const auto s = span_stats(sentences, prune_to_size(full, size));
    report << stats_row(s) << "\n";
    monotone = monotone && s.dict_size >= previous_size && s.average_spans <= previous_avg;
    previous_size = s.dict_size;
    previous_avg = s.average_spans;
  }
  const std::string golden = slurp(data / "sample_stats_golden.tsv");
  const bool matches_golden = report.str() == golden;
  const bool ok = sentences.size() == 1000 && with_full.average_spans < empty.average_spans &&
                  monotone && matches_golden;
  return verdict(ok, "avg spans " + fmt(empty.average_spans) + " (empty) vs " +
                         fmt(with_full.average_spans) + " (full, " + std::to_string(full.size()) +
                         " entries); sweep monotone " + (monotone ? "yes" : "no") +
                         ", golden " + (matches_golden ? "match" : "MISMATCH"));
}

// 9. Byte-identical persistence and exact metric goldens.
Outcome persistence_and_metrics() {
  std::vector<std::string> problems;
  const auto dir = fs::temp_directory_path() / "spanft_acceptance";
  fs::create_directories(dir);

  std::istringstream corpus(oracle::random_corpus(77, 50000, 60));
  CountOptions opt;
  opt.max_n = 4;
  const auto dict = build_dictionary_from_corpus(corpus, opt, 2);
  save_dictionary(dict, dir / "a.txt");
  save_dictionary(load_dictionary(dir / "a.txt"), dir / "b.txt");
  if (slurp(dir / "a.txt") != slurp(dir / "b.txt")) problems.push_back("dictionary bytes");
  if (!(load_dictionary(dir / "a.txt") == dict)) problems.push_back("dictionary entries");

  EmbeddingFile emb;
  emb.d = 16;
  ToyEncoderConfig cfg;
  cfg.d = 16;
  for (const char* s : {"a short sentence", "another one here , with punctuation !", "x"}) {
    emb.sentences.push_back(to_float(toy_encode(normalize_words(s), cfg)));
  }
  save_embeddings(emb, dir / "a.bin");
  const auto back = load_embeddings(dir / "a.bin");
  save_embeddings(back, dir / "b.bin");
  if (!(back == emb) || slurp(dir / "a.bin") != slurp(dir / "b.bin")) {
    problems.push_back("embedding bytes");
  }
  fs::remove_all(dir);

  using V = std::vector<int>;
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  if (!near(matthews_corr(V{1, 0, 1, 0}, V{1, 0, 1, 0}), 1.0)) problems.push_back("mcc 1");
  if (!near(matthews_corr(V{0, 1, 0, 1}, V{1, 0, 1, 0}), -1.0)) problems.push_back("mcc -1");
  if (!near(matthews_corr(V{1, 1, 0, 0}, V{1, 0, 0, 1}), 0.0)) problems.push_back("mcc 0");
  if (!near(pearson_corr(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5)) {
    problems.push_back("pearson");
  }
  if (!near(classification_metrics(V{1, 1, 1, 0, 0}, V{1, 1, 0, 1, 0}).f1, 2.0 / 3.0)) {
    problems.push_back("f1");
  }
  std::string detail = "dictionary (" + std::to_string(dict.size()) +
                       " entries) and embedding roundtrips, MCC/Pearson/F1 goldens";
  for (const auto& p : problems) detail += "; failed: " + p;
  return verdict(problems.empty(), detail);
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 for no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "counting oracle", 60, counting_oracle},
      {2, "wikitext-103 dictionary size", 1800, wikitext_dictionary},
      {3, "segmenter oracle", 10, segmenter_oracle},
      {4, "gradient check", 30, gradient_grid},
      {5, "padding invariance", 0, padding_invariance},
      {6, "toy phrase task", 120, phrase_task},
      {7, "McNemar", 0, mcnemar},
      {8, "dictionary-size curve", 0, dictionary_curve},
      {9, "persistence and metric goldens", 0, persistence_and_metrics},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Status::pass && c.budget_seconds > 0 && seconds > c.budget_seconds) {
      o.status = Status::fail;
      o.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    const char* label = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << "[" << label << "] " << c.id << ". " << c.name << ": " << o.detail << " ("
              << std::fixed << std::setprecision(2) << seconds << " s)" << std::defaultfloat
              << std::endl;
    if (o.status == Status::fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

#include "spanft/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spanft/error.hpp"
#include "spanft/eval_stats.hpp"
#include "spanft/frozen_encoder.hpp"
#include "spanft/ngram_dict.hpp"
#include "spanft/segmenter.hpp"
#include "spanft/span_encoder.hpp"
#include "spanft/trainer.hpp"

namespace spanft::cli {
namespace {

using nlohmann::json;

// Thrown for bad flag values that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flag values rejected by library validation are usage errors, not data
// errors.
template <class F>
void as_usage(F&& fn) {
  try {
    fn();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

// Writes to `path`, or to `fallback` when the path is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw Error("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }
  void close(const std::string& path) {
    if (file_) {
      file_->close();
      if (!*file_) throw Error("write failed: " + path);
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

std::vector<int> read_int_column(const std::string& path) {
  auto in = open_in(path);
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream cell(line);
    long long v = 0;
    std::string rest;
    if (!(cell >> v) || (cell >> rest)) throw ParseError(path, line_no, "expected an integer");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<double> read_real_column(const std::string& path) {
  auto in = open_in(path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream cell(line);
    double v = 0;
    std::string rest;
    if (!(cell >> v) || (cell >> rest)) throw ParseError(path, line_no, "expected a number");
    out.push_back(v);
  }
  return out;
}

std::string config_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      if (!joined.empty()) joined += ',';
      joined += config_value(item);
    }
    return joined;
  }
  return v.dump();
}

// Appends `--key value` for every config entry whose flag is not already on
// the command line, so explicit flags win.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  auto in = open_in(path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, std::string("malformed JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw ParseError(path, 0, "config must be a JSON object");
  const auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = key.rfind("--", 0) == 0 ? key : "--" + key;
    if (flag == "--config" || given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    args.push_back(flag);
    args.push_back(config_value(value));
  }
  return args;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Flags {
  std::uint64_t seed = 42;

  // build-dict
  std::string corpus, out;
  std::size_t max_n = NgramDictionary::kDefaultMaxN;
  std::uint64_t min_count = NgramDictionary::kDefaultMinCount;
  unsigned threads = 1;
  std::size_t shard_budget = std::size_t{1} << 22;
  std::string spill_dir;

  // prune-dict, segment, stats
  std::string dict, in;
  std::size_t size = 0;
  std::string mode = "greedy";
  std::size_t max_len = 3;
  std::vector<std::size_t> dict_sizes;

  // encode
  std::size_t d = 32;
  double context_mix = 0.5;

  // train
  std::string train_path, dev_path, history, predictions;
  double lr = 1e-3, warmup = 0.1, weight_decay = 0.01;
  std::size_t batch_size = 16, epochs = 3, r = 16, l = 64, kernel = 3, num_labels = 2;
  std::string variant = "cnn_cnn";
  std::string head = "span";

  // eval, mcnemar
  std::string gold, pred, pred_b;
  bool pearson = false;
  std::uint64_t b = 0, c = 0;

  // gradcheck
  std::size_t gc_d = 3, gc_r = 2, gc_l = 4;
  double epsilon = 1e-5, tolerance = 1e-4;
};

int cmd_build_dict(const Flags& f, std::ostream& out) {
  CountOptions options;
  options.max_n = f.max_n;
  options.threads = f.threads;
  options.shard_budget = f.shard_budget;
  options.spill_dir = f.spill_dir;
  auto in = open_in(f.corpus);
  const auto dict = build_dictionary_from_corpus(in, options, f.min_count, f.corpus);
  save_dictionary(dict, f.out);
  out << "wrote " << dict.size() << " n-grams to " << f.out << "\n";
  return kExitOk;
}

int cmd_prune_dict(const Flags& f, std::ostream& out) {
  const auto dict = prune_to_size(load_dictionary(f.dict), f.size);
  save_dictionary(dict, f.out);
  out << "wrote " << dict.size() << " n-grams to " << f.out << "\n";
  return kExitOk;
}

Segmenter make_segmenter(const Flags& f, const NgramDictionary* dict) {
  Segmenter seg;
  as_usage([&] { seg.mode = parse_segmentation_mode(f.mode); });
  seg.dict = dict;
  seg.seed = f.seed;
  seg.max_len = f.max_len;
  if (seg.mode == SegmentationMode::greedy && dict == nullptr) {
    throw UsageError("--dict is required for greedy segmentation");
  }
  return seg;
}

int cmd_segment(const Flags& f, std::ostream& out) {
  if (f.mode == "external") throw UsageError("segment does not accept --mode external");
  std::optional<NgramDictionary> dict;
  if (!f.dict.empty()) dict = load_dictionary(f.dict);
  const Segmenter seg = make_segmenter(f, dict ? &*dict : nullptr);
  auto in = open_in(f.in);
  const auto sentences = read_sentences(in);
  Output sink(f.out, out);
  for (const auto& words : sentences) {
    *sink << segmentation_record(words, seg.segment(words)) << "\n";
  }
  sink.close(f.out);
  return kExitOk;
}

int cmd_stats(const Flags& f, std::ostream& out) {
  const NgramDictionary dict = f.dict.empty() ? NgramDictionary() : load_dictionary(f.dict);
  auto in = open_in(f.in);
  const auto sentences = read_sentences(in);
  if (sentences.empty()) throw EmptyInputError(f.in + ": no sentences");
  Output sink(f.out, out);
  *sink << kStatsHeader << "\n";
  if (f.dict_sizes.empty()) {
    *sink << stats_row(span_stats(sentences, dict)) << "\n";
  } else {
    for (std::size_t size : f.dict_sizes) {
      *sink << stats_row(span_stats(sentences, prune_to_size(dict, size))) << "\n";
    }
  }
  sink.close(f.out);
  return kExitOk;
}

int cmd_encode(const Flags& f, std::ostream& out) {
  ToyEncoderConfig cfg;
  cfg.d = f.d;
  cfg.seed = f.seed;
  cfg.context_mix = f.context_mix;
  as_usage([&] { cfg.validate(); });
  auto in = open_in(f.in);
  EmbeddingFile file;
  file.d = static_cast<std::uint32_t>(f.d);
  for (const auto& words : read_sentences(in)) {
    file.sentences.push_back(to_float(toy_encode(words.words, cfg)));
  }
  save_embeddings(file, f.out);
  out << "wrote " << file.sentences.size() << " sentences (d=" << f.d << ") to " << f.out
      << "\n";
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  TrainConfig config;
  config.learning_rate = f.lr;
  config.warmup_ratio = f.warmup;
  config.weight_decay = f.weight_decay;
  config.batch_size = f.batch_size;
  config.max_epochs = f.epochs;
  config.seed = f.seed;
  config.layout = {f.r, f.l};
  config.kernel = f.kernel;
  config.num_labels = f.num_labels;
  as_usage([&] {
    config.variant = parse_variant(f.variant);
    config.validate();
  });
  if (f.head == "span") {
    config.head_input = HeadInput::span;
  } else if (f.head == "cls") {
    config.head_input = HeadInput::cls_only;
  } else {
    throw UsageError("--head must be span or cls");
  }

  std::optional<NgramDictionary> dict;
  if (!f.dict.empty()) dict = load_dictionary(f.dict);
  const Segmenter seg = make_segmenter(f, dict ? &*dict : nullptr);
  ToyEncoderConfig encoder;
  encoder.d = f.d;
  encoder.seed = f.seed;
  encoder.context_mix = f.context_mix;
  as_usage([&] { encoder.validate(); });

  const auto train_set = load_dataset(f.train_path);
  const auto dev_set = f.dev_path.empty() ? std::vector<LabeledExample>{}
                                          : load_dataset(f.dev_path);
  const auto encoded_dev = prepare_examples(dev_set, seg, encoder);
  const auto result = train(prepare_examples(train_set, seg, encoder), encoded_dev, config);

  Output sink(f.history, out);
  for (const auto& m : result.history) *sink << history_record(m) << "\n";
  sink.close(f.history);
  if (!f.predictions.empty()) {
    Output preds(f.predictions, out);
    for (std::size_t label : predict(result.model, encoded_dev).labels) *preds << label << "\n";
    preds.close(f.predictions);
  }
  if (!f.history.empty() && f.history != "-" && !result.history.empty()) {
    const auto& last = result.history.back();
    out << "epochs " << last.epoch << " train_loss " << format_double(last.train_loss)
        << " dev_accuracy " << format_double(last.dev_accuracy) << "\n";
  }
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  json report = json::object();
  if (f.pearson) {
    const auto gold = read_real_column(f.gold);
    const auto pred = read_real_column(f.pred);
    report["pearson"] = pearson_corr(pred, gold);
  } else {
    const auto gold = read_int_column(f.gold);
    const auto pred = read_int_column(f.pred);
    const auto m = classification_metrics(pred, gold);
    report["accuracy"] = m.accuracy;
    report["f1"] = m.f1;
    const auto binary = [](const std::vector<int>& v) {
      return std::all_of(v.begin(), v.end(), [](int x) { return x == 0 || x == 1; });
    };
    if (binary(gold) && binary(pred)) report["mcc"] = matthews_corr(pred, gold);
    if (!f.pred_b.empty()) {
      const auto pred_b = read_int_column(f.pred_b);
      const auto mc = mcnemar_test(gold, pred, pred_b);
      report["mcnemar_b"] = mc.b;
      report["mcnemar_c"] = mc.c;
      report["mcnemar_p"] = mc.p_value;
      report["mcnemar_method"] = method_name(mc.method);
    }
  }
  Output sink(f.out, out);
  *sink << report.dump() << "\n";
  sink.close(f.out);
  return kExitOk;
}

int cmd_mcnemar(const Flags& f, std::ostream& out) {
  McNemarResult r;
  if (!f.gold.empty()) {
    if (f.pred.empty() || f.pred_b.empty()) {
      throw UsageError("--gold needs both --pred and --pred-b");
    }
    r = mcnemar_test(read_int_column(f.gold), read_int_column(f.pred),
                     read_int_column(f.pred_b));
  } else {
    r = mcnemar_test(f.b, f.c);
  }
  json report = {{"b", r.b}, {"c", r.c}, {"p_value", r.p_value}, {"method", method_name(r.method)}};
  out << report.dump() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  std::vector<Variant> variants;
  if (f.variant == "all") {
    variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  } else {
    as_usage([&] { variants.push_back(parse_variant(f.variant)); });
  }
  bool ok = true;
  for (Variant v : variants) {
    GradCheckOptions o;
    o.d = f.gc_d;
    o.r = f.gc_r;
    o.l = f.gc_l;
    o.k = f.kernel;
    o.variant = v;
    o.seed = f.seed;
    o.epsilon = f.epsilon;
    o.tolerance = f.tolerance;
    const auto report = grad_check(o);
    out << variant_name(v) << " max_relative_error " << std::scientific << std::setprecision(3)
        << report.max_relative_error << std::defaultfloat << " at " << report.worst << " over "
        << report.checked << " entries: " << (report.passed ? "PASS" : "FAIL") << "\n";
    ok = ok && report.passed;
  }
  return ok ? kExitOk : kExitData;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Span segmentation, encoding and evaluation toolkit", "spanft"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  std::string config_path;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", f.seed, "Seed for all randomness")->capture_default_str();
    sub->add_option("--config", config_path, "JSON object of flag values; flags win");
  };

  auto* build = app.add_subcommand("build-dict", "Count n-grams and write a dictionary");
  build->add_option("--corpus", f.corpus, "Text corpus, one sentence per line")->required();
  build->add_option("--out", f.out, "Dictionary output path")->required();
  build->add_option("--max-n", f.max_n, "Longest n-gram")->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{64}));
  build->add_option("--min-count", f.min_count, "Minimum count to keep")->capture_default_str()
      ->check(CLI::PositiveNumber);
  build->add_option("--threads", f.threads, "Counting threads")->capture_default_str()
      ->check(CLI::PositiveNumber);
  build->add_option("--shard-budget", f.shard_budget, "Tokens per shard before spilling (0 = never)")
      ->capture_default_str();
  build->add_option("--spill-dir", f.spill_dir, "Directory for spill files");
  add_common(build);

  auto* prune = app.add_subcommand("prune-dict", "Keep the N most frequent entries");
  prune->add_option("--dict", f.dict, "Input dictionary")->required();
  prune->add_option("--size", f.size, "Entries to keep")->required();
  prune->add_option("--out", f.out, "Output path")->required();
  add_common(prune);

  auto* segment = app.add_subcommand("segment", "Segment sentences into spans (JSON lines)");
  segment->add_option("--dict", f.dict, "Dictionary (greedy mode)");
  segment->add_option("--in", f.in, "Sentences, one per line")->required();
  segment->add_option("--out", f.out, "Output path (default stdout)");
  segment->add_option("--mode", f.mode, "greedy, random or singleton")->capture_default_str();
  segment->add_option("--max-len", f.max_len, "Longest random span")->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_common(segment);

  auto* stats = app.add_subcommand("stats", "Average span count per sentence");
  stats->add_option("--dict", f.dict, "Dictionary (empty if omitted)");
  stats->add_option("--in", f.in, "Sentences, one per line")->required();
  stats->add_option("--out", f.out, "Report path (default stdout)");
  stats->add_option("--dict-sizes", f.dict_sizes, "Comma-separated pruned sizes to sweep")
      ->delimiter(',');
  add_common(stats);

  auto* encode = app.add_subcommand("encode", "Toy contextual embeddings to an SPFE file");
  encode->add_option("--in", f.in, "Sentences, one per line")->required();
  encode->add_option("--out", f.out, "Embedding file")->required();
  encode->add_option("--d", f.d, "Hidden size")->capture_default_str();
  encode->add_option("--context-mix", f.context_mix, "Neighbour mixing weight")
      ->capture_default_str();
  add_common(encode);

  auto* train_cmd = app.add_subcommand("train", "Fine-tune the span encoder and classifier");
  train_cmd->add_option("--train", f.train_path, "Training set (JSON lines)")->required();
  train_cmd->add_option("--dev", f.dev_path, "Dev set (JSON lines)");
  train_cmd->add_option("--dict", f.dict, "Dictionary (greedy mode)");
  train_cmd->add_option("--mode", f.mode, "greedy, random, singleton or external")
      ->capture_default_str();
  train_cmd->add_option("--max-len", f.max_len, "Longest random span")->capture_default_str();
  train_cmd->add_option("--variant", f.variant, "cnn_cnn, cnn_max, attn_max or attn_attn")
      ->capture_default_str();
  train_cmd->add_option("--head", f.head, "span or cls")->capture_default_str();
  train_cmd->add_option("--lr", f.lr, "Peak learning rate")->capture_default_str();
  train_cmd->add_option("--warmup", f.warmup, "Warmup ratio")->capture_default_str();
  train_cmd->add_option("--weight-decay", f.weight_decay, "Decoupled weight decay")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", f.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--epochs", f.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--r", f.r, "Max spans")->capture_default_str();
  train_cmd->add_option("--l", f.l, "Max tokens per span")->capture_default_str();
  train_cmd->add_option("--kernel", f.kernel, "Convolution width")->capture_default_str();
  train_cmd->add_option("--num-labels", f.num_labels, "Classes")->capture_default_str();
  train_cmd->add_option("--d", f.d, "Toy encoder hidden size")->capture_default_str();
  train_cmd->add_option("--context-mix", f.context_mix, "Toy encoder mixing")
      ->capture_default_str();
  train_cmd->add_option("--history", f.history, "Per-epoch metrics (default stdout)");
  train_cmd->add_option("--predictions", f.predictions, "Dev predictions, one label per line");
  add_common(train_cmd);

  auto* eval = app.add_subcommand("eval", "Metrics from label files");
  eval->add_option("--gold", f.gold, "Gold labels, one per line")->required();
  eval->add_option("--pred", f.pred, "Predictions, one per line")->required();
  eval->add_option("--pred-b", f.pred_b, "Second system for a McNemar test");
  eval->add_flag("--pearson", f.pearson, "Treat values as real scores");
  eval->add_option("--out", f.out, "Report path (default stdout)");
  add_common(eval);

  auto* mcnemar = app.add_subcommand("mcnemar", "McNemar test on discordant counts");
  mcnemar->add_option("--b", f.b, "A correct, B wrong");
  mcnemar->add_option("--c", f.c, "A wrong, B correct");
  mcnemar->add_option("--gold", f.gold, "Gold labels");
  mcnemar->add_option("--pred", f.pred, "System A predictions");
  mcnemar->add_option("--pred-b", f.pred_b, "System B predictions");
  add_common(mcnemar);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare gradients to finite differences");
  gradcheck->add_option("--d", f.gc_d, "Hidden size")->capture_default_str();
  gradcheck->add_option("--r", f.gc_r, "Max spans")->capture_default_str();
  gradcheck->add_option("--l", f.gc_l, "Max tokens per span")->capture_default_str();
  gradcheck->add_option("--k", f.kernel, "Convolution width");
  gradcheck->add_option("--variant", f.variant, "Encoder variant or 'all'");
  gradcheck->add_option("--epsilon", f.epsilon, "Finite-difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", f.tolerance, "Max relative error")->capture_default_str();
  add_common(gradcheck);

  try {
    const auto args = merge_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }

  try {
    if (build->parsed()) return cmd_build_dict(f, out);
    if (prune->parsed()) return cmd_prune_dict(f, out);
    if (segment->parsed()) return cmd_segment(f, out);
    if (stats->parsed()) return cmd_stats(f, out);
    if (encode->parsed()) return cmd_encode(f, out);
    if (train_cmd->parsed()) return cmd_train(f, out);
    if (eval->parsed()) return cmd_eval(f, out);
    if (mcnemar->parsed()) return cmd_mcnemar(f, out);
    if (gradcheck->parsed()) return cmd_gradcheck(f, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace spanft::cli

#include "spanft/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "spanft/error.hpp"
#include "spanft/eval_stats.hpp"
#include "spanft/random.hpp"
#include "spanft/text.hpp"

namespace spanft {

ClassifierHead ClassifierHead::zeros(std::size_t in, std::size_t labels) {
  ClassifierHead h;
  h.in = in;
  h.labels = labels;
  h.weight.assign(in * labels, 0.0);
  h.bias.assign(labels, 0.0);
  return h;
}

ClassifierHead ClassifierHead::uniform(std::size_t in, std::size_t labels, std::uint64_t seed,
                                       double scale) {
  ClassifierHead h = zeros(in, labels);
  SplitMix64 rng(seed);
  for (double& w : h.weight) w = rng.uniform(-scale, scale);
  for (double& b : h.bias) b = rng.uniform(-scale, scale);
  return h;
}

std::vector<double> ClassifierHead::logits(std::span<const double> x) const {
  if (x.size() != in) {
    throw ShapeError("classifier expects width " + std::to_string(in) + ", got " +
                     std::to_string(x.size()));
  }
  std::vector<double> out(bias);
  for (std::size_t c = 0; c < labels; ++c) {
    const double* w = weight.data() + c * in;
    for (std::size_t i = 0; i < in; ++i) out[c] += w[i] * x[i];
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
    throw ArgumentError("warmup_ratio must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (num_labels < 2) throw ArgumentError("num_labels must be >= 2");
  if (layout.r < 1 || layout.l < 1) throw ArgumentError("r and l must be >= 1");
  if (kernel % 2 == 0) throw ArgumentError("kernel width must be odd");
}

double cross_entropy(std::span<const double> logits, std::size_t label, std::span<double> grad) {
  if (label >= logits.size()) {
    throw ArgumentError("label " + std::to_string(label) + " outside [0, " +
                        std::to_string(logits.size()) + ")");
  }
  if (grad.size() != logits.size()) throw ShapeError("gradient buffer size mismatch");
  double top = -INFINITY;
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("non-finite logit");
    top = std::max(top, z);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = std::exp(logits[i] - top);
    total += grad[i];
  }
  for (double& g : grad) g /= total;
  grad[label] -= 1.0;
  return std::log(total) + top - logits[label];
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state,
               std::size_t step, double lr, double weight_decay, const AdamConfig& adam) {
  if (step < 1) throw ArgumentError("Adam step is 1-based");
  if (grads.size() != params.size()) throw ShapeError("gradient/parameter size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(adam.beta1, t);
  const double correction2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * g;
    state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= lr * weight_decay * params[i];
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.epsilon);
  }
}

double lr_at_step(std::size_t step, std::size_t total_steps, const TrainConfig& config) {
  if (step > total_steps) throw ArgumentError("step beyond total_steps");
  const double total = static_cast<double>(total_steps);
  const double warmup = config.warmup_ratio * total;
  const double s = static_cast<double>(step);
  if (s < warmup) return config.learning_rate * s / warmup;
  if (total <= warmup) return config.learning_rate;
  return config.learning_rate * (total - s) / (total - warmup);
}

std::vector<LabeledExample> read_dataset(std::istream& in, const std::string& source) {
  using nlohmann::json;
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    const auto fail = [&](const std::string& why) { throw ParseError(source, line_no, why); };
    if (!j.is_object()) fail("expected a JSON object");
    if (!j.contains("label") || !j["label"].is_number_integer() || j["label"].get<long long>() < 0) {
      fail("\"label\" must be a non-negative integer");
    }
    LabeledExample ex;
    ex.label = j["label"].get<std::size_t>();
    const auto text_field = [&](const char* key) -> std::string {
      if (!j[key].is_string()) fail(std::string("\"") + key + "\" must be a string");
      return j[key].get<std::string>();
    };
    if (j.contains("text")) {
      ex.text = text_field("text");
    } else if (j.contains("text_a") && j.contains("text_b")) {
      ex.text = text_field("text_a");
      ex.text_b = text_field("text_b");
    } else if (!j.contains("tokens")) {
      fail("record needs \"text\", \"text_a\"/\"text_b\", or \"tokens\"/\"spans\"");
    }
    if (j.contains("tokens") || j.contains("spans")) {
      json seg = {{"tokens", j.value("tokens", json())}, {"spans", j.value("spans", json())}};
      std::istringstream one(seg.dump());
      try {
        auto parsed = read_segmentation(one);
        ex.presegmented = std::move(parsed.at(0));
      } catch (const ValidationError& e) {
        fail(e.what());
      }
      if (ex.text.empty()) ex.text = ex.presegmented->words.raw;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset(in, path.string());
}

SegmentationMode parse_segmentation_mode(std::string_view name) {
  if (name == "greedy") return SegmentationMode::greedy;
  if (name == "random") return SegmentationMode::random;
  if (name == "singleton") return SegmentationMode::singleton;
  if (name == "external") return SegmentationMode::external;
  throw ArgumentError("unknown segmentation mode '" + std::string(name) +
                      "' (expected greedy, random, singleton or external)");
}

SpanPartition Segmenter::segment(const WordSequence& words) const {
  switch (mode) {
    case SegmentationMode::greedy:
      if (dict == nullptr) throw ArgumentError("greedy segmentation needs a dictionary");
      return segment_greedy(*dict, words);
    case SegmentationMode::random:
      // Keyed by the sentence so a sentence always gets the same spans.
      return segment_random(words, hash_bytes(join_words(words.words), seed), max_len);
    case SegmentationMode::singleton:
      return SpanPartition::singletons(words.size());
    case SegmentationMode::external:
      throw ArgumentError("external segmentation comes with the example, not the segmenter");
  }
  throw ArgumentError("bad segmentation mode");
}

EncodedExample prepare_example(const LabeledExample& example, const Segmenter& segmenter,
                               const ToyEncoderConfig& encoder) {
  WordSequence words;
  std::vector<Span> spans;
  const auto append = [&](const WordSequence& part, const SpanPartition& partition) {
    const std::size_t base = words.words.size();
    for (const Span& s : partition) spans.push_back({s.start + base, s.end + base});
    words.words.insert(words.words.end(), part.words.begin(), part.words.end());
  };
  if (segmenter.mode == SegmentationMode::external) {
    if (!example.presegmented) {
      throw ArgumentError("external segmentation requires \"tokens\"/\"spans\" in every record");
    }
    append(example.presegmented->words, example.presegmented->partition);
  } else {
    const WordSequence a = normalize_and_tokenize(example.text);
    append(a, segmenter.segment(a));
    if (example.text_b) {
      const WordSequence b = normalize_and_tokenize(*example.text_b);
      append(b, segmenter.segment(b));
    }
  }
  const SpanPartition partition(spans, words.size());
  EncodedExample out;
  out.embeddings = toy_encode(words.words, encoder);
  out.boundaries =
      project_to_subwords(partition, SubwordAlignment::identity(words.size(), 1));
  out.label = example.label;
  return out;
}

std::vector<EncodedExample> prepare_examples(const std::vector<LabeledExample>& examples,
                                             const Segmenter& segmenter,
                                             const ToyEncoderConfig& encoder) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(prepare_example(ex, segmenter, encoder));
  return out;
}

Model Model::initialize(std::size_t d, const TrainConfig& config) {
  Model m;
  SplitMix64 seeds(config.seed);
  m.encoder = EncoderParams::uniform(d, config.kernel, seeds.next(), 0.05);
  const std::size_t width = config.head_input == HeadInput::span ? 2 * d : d;
  m.head = ClassifierHead::uniform(width, config.num_labels, seeds.next(), 0.05);
  m.head_input = config.head_input;
  m.variant = config.variant;
  m.layout = config.layout;
  return m;
}

ModelGradients ModelGradients::zeros_like(const Model& m) {
  return {EncoderParams::zeros(m.encoder.d, m.encoder.k),
          ClassifierHead::zeros(m.head.in, m.head.labels)};
}

double accumulate_gradients(const Model& model, const EncodedExample& ex,
                            ModelGradients& grads) {
  std::vector<double> dlogits(model.head.labels);
  if (model.head_input == HeadInput::cls_only) {
    const auto cls = ex.embeddings.row(0);
    const auto logits = model.head.logits(cls);
    const double loss = cross_entropy(logits, ex.label, dlogits);
    for (std::size_t c = 0; c < model.head.labels; ++c) {
      grads.head.bias[c] += dlogits[c];
      for (std::size_t i = 0; i < model.head.in; ++i) {
        grads.head.weight[c * model.head.in + i] += dlogits[c] * cls[i];
      }
    }
    return loss;
  }
  auto out = forward(ex.embeddings, ex.boundaries, model.encoder, model.variant, model.layout);
  const auto& rep = out.representation;
  const auto logits = model.head.logits(rep);
  const double loss = cross_entropy(logits, ex.label, dlogits);
  std::vector<double> drep(rep.size(), 0.0);
  for (std::size_t c = 0; c < model.head.labels; ++c) {
    grads.head.bias[c] += dlogits[c];
    const double* w = model.head.weight.data() + c * model.head.in;
    double* gw = grads.head.weight.data() + c * model.head.in;
    for (std::size_t i = 0; i < model.head.in; ++i) {
      gw[i] += dlogits[c] * rep[i];
      drep[i] += dlogits[c] * w[i];
    }
  }
  const auto g = backward(out.cache, model.encoder, drep);
  std::vector<std::span<double>> dst;
  grads.encoder.for_each_tensor([&](std::string_view, std::span<double> v) { dst.push_back(v); });
  std::size_t idx = 0;
  g.params.for_each_tensor([&](std::string_view, std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) dst[idx][i] += v[i];
    ++idx;
  });
  return loss;
}

namespace {

void check_examples(const std::vector<EncodedExample>& set, const TrainConfig& config,
                    std::size_t d, const char* name) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].label >= config.num_labels) {
      throw ValidationError(i + 1, std::string(name) + " label " +
                                       std::to_string(set[i].label) + " outside [0, " +
                                       std::to_string(config.num_labels) + ")");
    }
    if (set[i].embeddings.cols() != d) {
      throw ShapeError(std::string(name) + " example " + std::to_string(i + 1) +
                       " has a different hidden size");
    }
  }
}

EpochMetrics evaluate(const Model& model, const std::vector<EncodedExample>& dev,
                      std::size_t num_labels) {
  EpochMetrics m;
  if (dev.empty()) return m;
  const auto preds = predict(model, dev);
  std::vector<int> p(preds.labels.begin(), preds.labels.end());
  std::vector<int> y;
  y.reserve(dev.size());
  for (const auto& ex : dev) y.push_back(static_cast<int>(ex.label));
  const auto cls = classification_metrics(p, y);
  m.dev_accuracy = cls.accuracy;
  if (num_labels == 2) {
    m.dev_f1 = cls.f1;
    m.dev_mcc = matthews_corr(p, y);
  }
  return m;
}

}  // namespace

TrainResult train(const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& dev_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw EmptyInputError("training set is empty");
  const std::size_t d = train_set.front().embeddings.cols();
  check_examples(train_set, config, d, "training");
  check_examples(dev_set, config, d, "dev");

  TrainResult result;
  Model& model = result.model;
  model = Model::initialize(d, config);

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.max_epochs;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 shuffle_rng(mix64(config.seed ^ 0x5eedULL));

  std::vector<AdamMoments> moments(10);
  ModelGradients grads;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      grads = ModelGradients::zeros_like(model);
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(n, lo + config.batch_size);
      for (std::size_t i = lo; i < hi; ++i) {
        loss_sum += accumulate_gradients(model, train_set[order[i]], grads);
      }
      const double scale = 1.0 / static_cast<double>(hi - lo);
      ++step;
      const double lr = lr_at_step(step, total_steps, config);

      std::vector<std::span<double>> params;
      std::vector<std::span<double>> gvals;
      if (model.head_input == HeadInput::span) {
        model.encoder.for_each_tensor([&](std::string_view, std::span<double> v) { params.push_back(v); });
        grads.encoder.for_each_tensor([&](std::string_view, std::span<double> v) { gvals.push_back(v); });
      }
      params.push_back(model.head.weight);
      params.push_back(model.head.bias);
      gvals.push_back(grads.head.weight);
      gvals.push_back(grads.head.bias);
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (double& g : gvals[t]) g *= scale;
        adam_step(params[t], gvals[t], moments[t], step, lr, config.weight_decay);
      }
    }
    EpochMetrics m = evaluate(model, dev_set, config.num_labels);
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    result.history.push_back(m);
  }
  return result;
}

TrainResult train(const std::vector<LabeledExample>& train_set,
                  const std::vector<LabeledExample>& dev_set, const Segmenter& segmenter,
                  const ToyEncoderConfig& encoder, const TrainConfig& config) {
  if (train_set.empty()) throw EmptyInputError("training set is empty");
  return train(prepare_examples(train_set, segmenter, encoder),
               prepare_examples(dev_set, segmenter, encoder), config);
}

Predictions predict(const Model& model, const std::vector<EncodedExample>& examples) {
  Predictions out;
  out.labels.reserve(examples.size());
  out.logits.reserve(examples.size());
  for (const auto& ex : examples) {
    std::vector<double> logits;
    if (model.head_input == HeadInput::cls_only) {
      logits = model.head.logits(ex.embeddings.row(0));
    } else {
      logits = model.head.logits(
          forward(ex.embeddings, ex.boundaries, model.encoder, model.variant, model.layout)
              .representation);
    }
    const auto best = std::max_element(logits.begin(), logits.end());
    out.labels.push_back(static_cast<std::size_t>(best - logits.begin()));
    out.logits.push_back(std::move(logits));
  }
  return out;
}

std::string history_record(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["dev_accuracy"] = m.dev_accuracy;
  j["dev_f1"] = m.dev_f1;
  j["dev_mcc"] = m.dev_mcc;
  return j.dump();
}

}  // namespace spanft

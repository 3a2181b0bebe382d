#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spanft/frozen_encoder.hpp"
#include "spanft/matrix.hpp"
#include "spanft/ngram_dict.hpp"
#include "spanft/segmenter.hpp"
#include "spanft/span_encoder.hpp"

namespace spanft {

// Affine classifier on the sentence representation; weight is
// [labels][in].
struct ClassifierHead {
  std::size_t in = 0;
  std::size_t labels = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static ClassifierHead zeros(std::size_t in, std::size_t labels);
  static ClassifierHead uniform(std::size_t in, std::size_t labels, std::uint64_t seed,
                                double scale = 0.05);

  std::vector<double> logits(std::span<const double> x) const;
};

// What the head sees: the span representation [s ; t_1], or only t_1.
enum class HeadInput { span, cls_only };

struct TrainConfig {
  double learning_rate = 1e-3;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 3;
  std::uint64_t seed = 42;
  Variant variant = Variant::cnn_cnn;
  HeadInput head_input = HeadInput::span;
  SpanLayout layout{16, 64};
  std::size_t kernel = 3;
  std::size_t num_labels = 2;

  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// Softmax cross-entropy. Returns the loss and writes softmax - onehot into
// grad. NumericError on non-finite logits, ArgumentError on a bad label.
double cross_entropy(std::span<const double> logits, std::size_t label,
                     std::span<double> grad);

// One Adam update with bias correction and decoupled weight decay:
//   theta <- theta - lr * wd * theta - lr * m_hat / (sqrt(v_hat) + eps).
// `step` is 1-based. Moments are sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state,
               std::size_t step, double lr, double weight_decay, const AdamConfig& adam = {});

// Linear warmup from 0 over warmup_ratio * total_steps, then linear decay to
// 0 at total_steps.
double lr_at_step(std::size_t step, std::size_t total_steps, const TrainConfig& config);

// A sentence (or sentence pair) with its class.
struct LabeledExample {
  std::string text;
  std::optional<std::string> text_b;
  std::optional<SegmentedSentence> presegmented;  // for external segmentation
  std::size_t label = 0;
};

// {"text": str, "label": int} or {"text_a": str, "text_b": str, "label": int};
// records may also carry "tokens"/"spans" for external segmentation.
std::vector<LabeledExample> read_dataset(std::istream& in, const std::string& source = {});
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path);

enum class SegmentationMode { greedy, random, singleton, external };
SegmentationMode parse_segmentation_mode(std::string_view name);

struct Segmenter {
  SegmentationMode mode = SegmentationMode::greedy;
  const NgramDictionary* dict = nullptr;  // greedy mode
  std::uint64_t seed = 42;                // random mode
  std::size_t max_len = 3;                // random mode

  SpanPartition segment(const WordSequence& words) const;
};

// Frozen embeddings plus span boundaries over them, ready for training.
struct EncodedExample {
  Matrix embeddings;
  std::vector<Span> boundaries;
  std::size_t label = 0;
};

// Segments (pairs independently, spans concatenated in order), encodes with
// the toy encoder and projects spans onto rows of the embedding matrix.
EncodedExample prepare_example(const LabeledExample& example, const Segmenter& segmenter,
                               const ToyEncoderConfig& encoder);
std::vector<EncodedExample> prepare_examples(const std::vector<LabeledExample>& examples,
                                             const Segmenter& segmenter,
                                             const ToyEncoderConfig& encoder);

struct Model {
  EncoderParams encoder;
  ClassifierHead head;
  HeadInput head_input = HeadInput::span;
  Variant variant = Variant::cnn_cnn;
  SpanLayout layout;

  // Uniform(-0.05, 0.05) initialization from the config seed.
  static Model initialize(std::size_t d, const TrainConfig& config);
};

// Gradients with the shapes of a Model's trainable parts.
struct ModelGradients {
  EncoderParams encoder;
  ClassifierHead head;

  static ModelGradients zeros_like(const Model& m);
};

// Adds the cross-entropy gradient of one example into `grads` and returns
// its loss. In cls_only mode the encoder gradient stays zero.
double accumulate_gradients(const Model& model, const EncodedExample& example,
                            ModelGradients& grads);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  double dev_f1 = 0.0;
  double dev_mcc = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> history;
};

// Only the encoder and head are updated; embeddings are read-only.
TrainResult train(const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& dev_set, const TrainConfig& config);
TrainResult train(const std::vector<LabeledExample>& train_set,
                  const std::vector<LabeledExample>& dev_set, const Segmenter& segmenter,
                  const ToyEncoderConfig& encoder, const TrainConfig& config);

struct Predictions {
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> logits;
};

// Argmax with ties to the lowest class index.
Predictions predict(const Model& model, const std::vector<EncodedExample>& examples);

// {"epoch":..,"train_loss":..,"dev_accuracy":..,"dev_f1":..,"dev_mcc":..}
std::string history_record(const EpochMetrics& m);

}  // namespace spanft

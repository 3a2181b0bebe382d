#include <cmath>
#include <sstream>

#include "doctest.h"
#include "spanft/error.hpp"
#include "spanft/random.hpp"
#include "spanft/trainer.hpp"

using namespace spanft;

namespace {

std::vector<LabeledExample> separable_set(int count = 60) {
  // Label 1 iff the sentence mentions a colour.
  const std::vector<std::string> colour{"red", "blue", "green", "yellow"};
  const std::vector<std::string> filler{"the", "car", "is", "very", "fast", "slow", "old",
                                        "new", "house", "tree"};
  SplitMix64 rng(7);
  std::vector<LabeledExample> out;
  for (int i = 0; i < count; ++i) {
    std::string text;
    const bool pos = i % 2 == 0;
    for (int j = 0; j < 5; ++j) text += filler[rng.below(filler.size())] + " ";
    if (pos) text += colour[rng.below(colour.size())];
    else text += filler[rng.below(filler.size())];
    out.push_back({text, std::nullopt, std::nullopt, pos ? 1u : 0u});
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.batch_size = 8;
  c.max_epochs = 4;
  c.layout = {8, 4};
  return c;
}

ToyEncoderConfig small_encoder() {
  ToyEncoderConfig e;
  e.d = 8;
  return e;
}

Segmenter singleton() {
  Segmenter s;
  s.mode = SegmentationMode::singleton;
  return s;
}

}  // namespace

TEST_CASE("cross entropy") {
  std::vector<double> g(2);
  CHECK(cross_entropy(std::vector<double>{0, 0}, 0, g) == doctest::Approx(std::log(2.0)));
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == doctest::Approx(0.5));
  CHECK(cross_entropy(std::vector<double>{100, 0}, 0, g) < 1e-40);

  const std::vector<double> z{0.3, -1.2, 2.5, 0.1};
  std::vector<double> grad(4), scratch(4);
  cross_entropy(z, 2, grad);
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto plus = z, minus = z;
    plus[i] += 1e-6;
    minus[i] -= 1e-6;
    const double fd =
        (cross_entropy(plus, 2, scratch) - cross_entropy(minus, 2, scratch)) / 2e-6;
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{NAN, 0}, 0, g), NumericError);
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{0, 0}, 2, g), ArgumentError);
}

TEST_CASE("adam step") {
  AdamMoments state;
  std::vector<double> p{1.0, -2.0};
  adam_step(p, std::vector<double>{0, 0}, state, 1, 0.1, 0.0);
  CHECK(p == std::vector<double>{1.0, -2.0});

  AdamMoments fresh;
  std::vector<double> q{1.0, -2.0};
  adam_step(q, std::vector<double>{3.0, -0.5}, fresh, 1, 0.1, 0.0);
  CHECK(q[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(q[1] == doctest::Approx(-1.9).epsilon(1e-7));

  AdamMoments decay;
  std::vector<double> w{2.0};
  adam_step(w, std::vector<double>{0.0}, decay, 1, 0.1, 0.01);
  CHECK(w[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.01)).epsilon(1e-15));
  CHECK_THROWS_AS(adam_step(w, std::vector<double>{0.0}, decay, 0, 0.1, 0.0), ArgumentError);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.learning_rate = 2e-5;
  c.warmup_ratio = 0.1;
  CHECK(lr_at_step(5, 100, c) == doctest::Approx(1e-5));
  CHECK(lr_at_step(10, 100, c) == doctest::Approx(2e-5));
  CHECK(lr_at_step(55, 100, c) == doctest::Approx(1e-5));
  CHECK(lr_at_step(100, 100, c) == 0.0);
  CHECK(lr_at_step(0, 100, c) == 0.0);
  c.warmup_ratio = 0.0;
  CHECK(lr_at_step(0, 100, c) == doctest::Approx(2e-5));
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.warmup_ratio = 1.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("dataset reader") {
  std::istringstream in(
      "{\"text\":\"a b\",\"label\":1}\n"
      "\n"
      "{\"text_a\":\"x\",\"text_b\":\"y z\",\"label\":0}\n"
      "{\"tokens\":[\"p\",\"q\"],\"spans\":[[0,2]],\"label\":1}\n");
  const auto data = read_dataset(in, "d.jsonl");
  REQUIRE(data.size() == 3);
  CHECK(data[0].label == 1);
  CHECK(data[1].text_b == std::optional<std::string>("y z"));
  REQUIRE(data[2].presegmented);
  CHECK(data[2].presegmented->partition.size() == 1);

  std::istringstream bad("{\"text\":\"a\",\"label\":1}\n{\"text\":\"a\"}\n");
  try {
    read_dataset(bad, "d.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("pairs are segmented independently and concatenated") {
  const NgramDictionary dict(5, 1, {{"y z", 1}, {"x y", 1}});
  Segmenter seg;
  seg.dict = &dict;
  LabeledExample ex{"x", std::string("y z"), std::nullopt, 0};
  const auto enc = prepare_example(ex, seg, small_encoder());
  // "x y" would match across the pair boundary; it must not.
  CHECK(enc.boundaries == std::vector<Span>{{1, 2}, {2, 4}});
  CHECK(enc.embeddings.rows() == 4);
}

TEST_CASE("model gradient matches finite differences") {
  const auto examples = prepare_examples(separable_set(), singleton(), small_encoder());
  auto cfg = small_config();
  for (Variant v : kAllVariants) {
    cfg.variant = v;
    Model m = Model::initialize(8, cfg);
    m.encoder = EncoderParams::uniform(8, 3, 9, 0.5);
    m.head = ClassifierHead::uniform(16, 2, 10, 0.5);
    const std::vector<EncodedExample> batch(examples.begin(), examples.begin() + 4);
    auto grads = ModelGradients::zeros_like(m);
    for (const auto& ex : batch) accumulate_gradients(m, ex, grads);

    const auto total_loss = [&](const Model& model) {
      auto scratch = ModelGradients::zeros_like(model);
      double loss = 0;
      for (const auto& ex : batch) loss += accumulate_gradients(model, ex, scratch);
      return loss;
    };
    std::vector<std::span<double>> params, analytic;
    m.encoder.for_each_tensor([&](std::string_view, std::span<double> t) { params.push_back(t); });
    grads.encoder.for_each_tensor([&](std::string_view, std::span<double> t) { analytic.push_back(t); });
    params.push_back(m.head.weight);
    params.push_back(m.head.bias);
    analytic.push_back(grads.head.weight);
    analytic.push_back(grads.head.bias);
    double worst = 0;
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size(); i += 7) {
        const double keep = params[t][i];
        params[t][i] = keep + 1e-6;
        const double up = total_loss(m);
        params[t][i] = keep - 1e-6;
        const double down = total_loss(m);
        params[t][i] = keep;
        const double fd = (up - down) / 2e-6;
        const double a = analytic[t][i];
        worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
      }
    }
    INFO(variant_name(v));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training on a separable set") {
  const auto data = separable_set(200);
  ToyEncoderConfig encoder;
  encoder.d = 16;
  const auto result = train(data, data, singleton(), encoder, small_config());
  REQUIRE(result.history.size() == 4);
  for (std::size_t e = 1; e < 3; ++e) {
    CHECK(result.history[e].train_loss < result.history[e - 1].train_loss);
  }
  CHECK(result.history.back().dev_accuracy > 0.9);

  const auto again = train(data, data, singleton(), encoder, small_config());
  CHECK(again.model.encoder.fingerprint() == result.model.encoder.fingerprint());
  CHECK(again.model.head.weight == result.model.head.weight);
}

TEST_CASE("embeddings are not modified by training") {
  const auto encoded = prepare_examples(separable_set(), singleton(), small_encoder());
  const auto copy = encoded;
  train(encoded, {}, small_config());
  for (std::size_t i = 0; i < encoded.size(); ++i) CHECK(encoded[i].embeddings == copy[i].embeddings);
}

TEST_CASE("single repeated example loss is monotone after warmup") {
  const std::vector<LabeledExample> one(4, LabeledExample{"the red car", std::nullopt,
                                                          std::nullopt, 1});
  auto cfg = small_config();
  cfg.batch_size = 4;
  cfg.max_epochs = 20;
  cfg.learning_rate = 1e-3;
  const auto result = train(one, {}, singleton(), small_encoder(), cfg);
  // Warmup covers the first 2 of 20 steps.
  for (std::size_t e = 3; e < result.history.size(); ++e) {
    CHECK(result.history[e].train_loss <= result.history[e - 1].train_loss);
  }
}

TEST_CASE("predict") {
  const auto encoded = prepare_examples(separable_set(), singleton(), small_encoder());
  Model m = Model::initialize(8, small_config());
  m.head = ClassifierHead::zeros(16, 2);
  const auto p = predict(m, encoded);
  for (std::size_t label : p.labels) CHECK(label == 0);
  for (const auto& z : p.logits) CHECK(z == std::vector<double>{0.0, 0.0});

  const std::vector<EncodedExample> one{encoded[0]};
  auto cfg = small_config();
  cfg.max_epochs = 30;
  cfg.batch_size = 1;
  const auto fit = train(one, {}, cfg);
  CHECK(predict(fit.model, one).labels[0] == one[0].label);
  CHECK(predict(fit.model, one).logits == predict(fit.model, one).logits);
}

TEST_CASE("cls-only head") {
  auto cfg = small_config();
  cfg.head_input = HeadInput::cls_only;
  const auto result = train(separable_set(), separable_set(), singleton(), small_encoder(), cfg);
  CHECK(result.model.head.in == 8);
  // The toy [CLS] vector is constant, so this baseline cannot beat chance.
  CHECK(result.history.back().dev_accuracy == doctest::Approx(0.5));
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train(std::vector<LabeledExample>{}, {}, singleton(), small_encoder(),
                        small_config()),
                  EmptyInputError);
  const std::vector<LabeledExample> bad{{"a b", std::nullopt, std::nullopt, 5}};
  CHECK_THROWS_AS(train(bad, {}, singleton(), small_encoder(), small_config()), ValidationError);
  Segmenter greedy;
  CHECK_THROWS_AS(greedy.segment(normalize_and_tokenize("a b")), ArgumentError);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spanft/matrix.hpp"
#include "spanft/segmenter.hpp"

namespace spanft {

// Encoder architectures. The first word names the within-span stage, the
// second the across-span stage:
//   cnn_cnn   conv-maxpool over tokens, conv-maxpool over spans
//   cnn_max   conv-maxpool over tokens, elementwise max over spans
//   attn_max  self-attentive pool over tokens, elementwise max over spans
//   attn_attn self-attentive pool over tokens, self-attentive pool over spans
enum class Variant { cnn_cnn, cnn_max, attn_max, attn_attn };

inline constexpr Variant kAllVariants[] = {Variant::cnn_cnn, Variant::cnn_max,
                                           Variant::attn_max, Variant::attn_attn};

std::string_view variant_name(Variant v);
// Throws ArgumentError for unknown names.
Variant parse_variant(std::string_view name);

// 1-D convolution, weight laid out [out][in][tap]. Tap t reads the input at
// offset t - (k - 1) / 2.
struct ConvParams {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t k = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  double& w(std::size_t o, std::size_t i, std::size_t t) { return weight[(o * in + i) * k + t]; }
  double w(std::size_t o, std::size_t i, std::size_t t) const {
    return weight[(o * in + i) * k + t];
  }
};

// Single-hop self-attentive pooling: score_j = v . tanh(W h_j), weight
// [hidden][d].
struct AttentionParams {
  std::size_t hidden = 0;
  std::size_t d = 0;
  std::vector<double> weight;
  std::vector<double> v;
};

struct EncoderParams {
  std::size_t d = 0;
  std::size_t k = 3;
  ConvParams token_conv;  // within-span stage
  ConvParams span_conv;   // across-span stage
  AttentionParams token_attn;
  AttentionParams span_attn;

  static EncoderParams zeros(std::size_t d, std::size_t k = 3);
  // Every entry uniform in (-scale, scale), drawn from splitmix64(seed).
  static EncoderParams uniform(std::size_t d, std::size_t k, std::uint64_t seed,
                               double scale = 0.05);

  // Output size equals d, k odd, consistent tensor sizes, finite values.
  void validate() const;

  // Visits (name, values) for every trainable tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& fn) {
    fn("token_conv.weight", std::span<double>(token_conv.weight));
    fn("token_conv.bias", std::span<double>(token_conv.bias));
    fn("span_conv.weight", std::span<double>(span_conv.weight));
    fn("span_conv.bias", std::span<double>(span_conv.bias));
    fn("token_attn.weight", std::span<double>(token_attn.weight));
    fn("token_attn.v", std::span<double>(token_attn.v));
    fn("span_attn.weight", std::span<double>(span_attn.weight));
    fn("span_attn.v", std::span<double>(span_attn.v));
  }
  template <typename F>
  void for_each_tensor(F&& fn) const {
    fn("token_conv.weight", std::span<const double>(token_conv.weight));
    fn("token_conv.bias", std::span<const double>(token_conv.bias));
    fn("span_conv.weight", std::span<const double>(span_conv.weight));
    fn("span_conv.bias", std::span<const double>(span_conv.bias));
    fn("token_attn.weight", std::span<const double>(token_attn.weight));
    fn("token_attn.v", std::span<const double>(token_attn.v));
    fn("span_attn.weight", std::span<const double>(span_attn.weight));
    fn("span_attn.v", std::span<const double>(span_attn.v));
  }

  std::uint64_t fingerprint() const;
};

// r x l x d padded span container. Valid slots form a prefix of each row;
// padded slots hold zeros. source[i * l + j] is the row of T copied into
// slot (i, j).
struct SpanTensor {
  std::size_t r = 0;
  std::size_t l = 0;
  std::size_t d = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> lengths;  // per row, 0 for padded rows
  std::vector<std::size_t> source;
  std::size_t span_count = 0;

  std::span<const double> slot(std::size_t i, std::size_t j) const {
    return {data.data() + (i * l + j) * d, d};
  }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * l * d, l * d}; }
};

struct SpanLayout {
  std::size_t r = 16;
  std::size_t l = 64;
};

// Copies the tokens of each span (absolute rows of T, never row 0) into the
// padded container. Spans past r and tokens past l are dropped. Throws
// EmptySpansError when no span survives.
SpanTensor gather_spans(const Matrix& t, const std::vector<Span>& boundaries,
                        const SpanLayout& layout);

struct SpanVectors {
  Matrix c;                          // r x d
  std::vector<std::uint8_t> valid;   // per row
};

// Within-span conv + ReLU + masked max. Fully masked rows give zeros.
SpanVectors token_stage(const SpanTensor& spans, const EncoderParams& params);
// Across-span conv + ReLU + masked max. Throws EmptySpansError when no span
// is valid.
std::vector<double> span_stage(const SpanVectors& spans, const EncoderParams& params);
// Masked softmax(v . tanh(W h)) weighted sum over the valid rows of `h`.
// Throws EmptySpansError when no row is valid.
std::vector<double> self_attentive_pool(const Matrix& h, std::span<const std::uint8_t> valid,
                                        const AttentionParams& params);
std::vector<double> self_attentive_pool(const Matrix& h, const AttentionParams& params);
// [s ; t_1], length 2d.
std::vector<double> concat_cls(std::span<const double> s, const Matrix& t);
// Stage-1 span vectors without the across-span pooling, for token-level
// heads.
Matrix encode_token_level(const SpanTensor& spans, const EncoderParams& params);

// Everything backward() needs from one forward() call.
class ForwardCache {
 public:
  bool valid() const { return valid_; }

 private:
  friend struct EncoderPass;
  bool valid_ = false;
  Variant variant_ = Variant::cnn_cnn;
  std::uint64_t params_fingerprint_ = 0;
  std::size_t m_ = 0;
  std::size_t d_ = 0;
  SpanTensor spans_;
  SpanVectors stage1_;
  // Per-row stage-1 internals.
  std::vector<std::vector<double>> pre1_;       // conv pre-activations, l x d
  std::vector<std::vector<std::size_t>> arg1_;  // max positions per channel
  std::vector<std::vector<double>> tanh1_;      // attention tanh(W h), l x hidden
  std::vector<std::vector<double>> alpha1_;     // attention weights, l
  // Stage-2 internals.
  std::vector<double> pre2_;
  std::vector<std::size_t> arg2_;
  std::vector<double> tanh2_;
  std::vector<double> alpha2_;
};

struct EncoderOutput {
  std::vector<double> representation;  // s* = [s ; t_1]
  ForwardCache cache;
};

EncoderOutput forward(const Matrix& t, const std::vector<Span>& boundaries,
                      const EncoderParams& params, Variant variant, const SpanLayout& layout);

struct EncoderGradients {
  EncoderParams params;  // same shapes as the parameters
  Matrix inputs;         // m x d, gradient on T
};

// Exact adjoint of forward(). ReLU has subgradient 0 at 0; max routes to the
// first maximal position; padded slots get nothing. Throws CacheError when
// the cache is empty or was produced with different parameters.
EncoderGradients backward(const ForwardCache& cache, const EncoderParams& params,
                          std::span<const double> upstream);

struct GradCheckOptions {
  std::size_t d = 3;
  std::size_t r = 2;
  std::size_t l = 4;
  std::size_t k = 3;
  Variant variant = Variant::cnn_cnn;
  std::uint64_t seed = 42;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst;  // "<tensor>[<index>]" with the largest error
  std::size_t checked = 0;
  bool passed = false;
};

// Compares backward() to central differences of a random projection of s*
// for every parameter and every entry of T. Relative error is
// |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const GradCheckOptions& options);

}  // namespace spanft

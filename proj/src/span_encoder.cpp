#include "spanft/span_encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "spanft/error.hpp"
#include "spanft/random.hpp"

namespace spanft {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

ConvParams make_conv(std::size_t d, std::size_t k) {
  ConvParams c;
  c.out = d;
  c.in = d;
  c.k = k;
  c.weight.assign(d * d * k, 0.0);
  c.bias.assign(d, 0.0);
  return c;
}

AttentionParams make_attn(std::size_t d) {
  AttentionParams a;
  a.hidden = d;
  a.d = d;
  a.weight.assign(d * d, 0.0);
  a.v.assign(d, 0.0);
  return a;
}

void check_conv(const ConvParams& c, std::size_t d, std::size_t k, const char* name) {
  if (c.out != d || c.in != d || c.k != k || c.weight.size() != d * d * k ||
      c.bias.size() != d) {
    throw ShapeError(std::string(name) + " does not match hidden size " + std::to_string(d) +
                     " and kernel " + std::to_string(k));
  }
}

void check_attn(const AttentionParams& a, std::size_t d, const char* name) {
  if (a.d != d || a.hidden == 0 || a.weight.size() != a.hidden * d || a.v.size() != a.hidden) {
    throw ShapeError(std::string(name) + " does not match hidden size " + std::to_string(d));
  }
}

// Conv over `positions` rows of x (each `conv.in` wide) with zero same-padding,
// then ReLU and a max over valid positions. Invalid positions are neither
// read (they count as padding) nor pooled.
void conv_max_forward(const double* x, std::size_t positions, const std::uint8_t* valid,
                      const ConvParams& conv, std::span<double> out, std::vector<double>& pre,
                      std::vector<std::size_t>& arg) {
  const std::size_t half = (conv.k - 1) / 2;
  pre.assign(positions * conv.out, 0.0);
  arg.assign(conv.out, kNone);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    double* pj = pre.data() + j * conv.out;
    for (std::size_t o = 0; o < conv.out; ++o) {
      double acc = conv.bias[o];
      for (std::size_t t = 0; t < conv.k; ++t) {
        if (j + t < half) continue;
        const std::size_t src = j + t - half;
        if (src >= positions || !valid[src]) continue;
        const double* xs = x + src * conv.in;
        for (std::size_t i = 0; i < conv.in; ++i) acc += conv.w(o, i, t) * xs[i];
      }
      pj[o] = acc;
      const double act = acc > 0.0 ? acc : 0.0;
      if (arg[o] == kNone || act > out[o]) {
        out[o] = act;
        arg[o] = j;
      }
    }
  }
}

void conv_max_backward(const double* x, std::size_t positions, const std::uint8_t* valid,
                       const ConvParams& conv, const std::vector<double>& pre,
                       const std::vector<std::size_t>& arg, std::span<const double> dout,
                       ConvParams& grad, double* dx) {
  const std::size_t half = (conv.k - 1) / 2;
  for (std::size_t o = 0; o < conv.out; ++o) {
    const std::size_t j = arg[o];
    if (j == kNone || !(pre[j * conv.out + o] > 0.0)) continue;
    const double g = dout[o];
    if (g == 0.0) continue;
    grad.bias[o] += g;
    for (std::size_t t = 0; t < conv.k; ++t) {
      if (j + t < half) continue;
      const std::size_t src = j + t - half;
      if (src >= positions || !valid[src]) continue;
      const double* xs = x + src * conv.in;
      double* dxs = dx + src * conv.in;
      for (std::size_t i = 0; i < conv.in; ++i) {
        grad.w(o, i, t) += g * xs[i];
        dxs[i] += g * conv.w(o, i, t);
      }
    }
  }
}

// Returns false (and zeros) when no position is valid.
bool attn_forward(const double* x, std::size_t positions, std::size_t d,
                  const std::uint8_t* valid, const AttentionParams& attn,
                  std::span<double> out, std::vector<double>& tanh_cache,
                  std::vector<double>& alpha) {
  const std::size_t h = attn.hidden;
  tanh_cache.assign(positions * h, 0.0);
  alpha.assign(positions, 0.0);
  std::fill(out.begin(), out.end(), 0.0);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(positions, 0.0);
  bool any = false;
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    any = true;
    const double* xj = x + j * d;
    double* uj = tanh_cache.data() + j * h;
    double score = 0.0;
    for (std::size_t a = 0; a < h; ++a) {
      double z = 0.0;
      for (std::size_t i = 0; i < d; ++i) z += attn.weight[a * d + i] * xj[i];
      uj[a] = std::tanh(z);
      score += attn.v[a] * uj[a];
    }
    scores[j] = score;
    best = std::max(best, score);
  }
  if (!any) return false;
  double total = 0.0;
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    alpha[j] = std::exp(scores[j] - best);
    total += alpha[j];
  }
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    alpha[j] /= total;
    const double* xj = x + j * d;
    for (std::size_t i = 0; i < d; ++i) out[i] += alpha[j] * xj[i];
  }
  return true;
}

void attn_backward(const double* x, std::size_t positions, std::size_t d,
                   const std::uint8_t* valid, const AttentionParams& attn,
                   const std::vector<double>& tanh_cache, const std::vector<double>& alpha,
                   std::span<const double> dout, AttentionParams& grad, double* dx) {
  const std::size_t h = attn.hidden;
  std::vector<double> dalpha(positions, 0.0);
  double weighted = 0.0;
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    const double* xj = x + j * d;
    double* dxj = dx + j * d;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dot += dout[i] * xj[i];
      dxj[i] += alpha[j] * dout[i];
    }
    dalpha[j] = dot;
    weighted += alpha[j] * dot;
  }
  std::vector<double> dz(h);
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    const double dscore = alpha[j] * (dalpha[j] - weighted);
    const double* uj = tanh_cache.data() + j * h;
    const double* xj = x + j * d;
    double* dxj = dx + j * d;
    for (std::size_t a = 0; a < h; ++a) {
      grad.v[a] += dscore * uj[a];
      dz[a] = dscore * attn.v[a] * (1.0 - uj[a] * uj[a]);
    }
    for (std::size_t a = 0; a < h; ++a) {
      for (std::size_t i = 0; i < d; ++i) {
        grad.weight[a * d + i] += dz[a] * xj[i];
        dxj[i] += attn.weight[a * d + i] * dz[a];
      }
    }
  }
}

void masked_max_forward(const double* x, std::size_t positions, std::size_t d,
                        const std::uint8_t* valid, std::span<double> out,
                        std::vector<std::size_t>& arg) {
  arg.assign(d, kNone);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < positions; ++j) {
    if (!valid[j]) continue;
    for (std::size_t c = 0; c < d; ++c) {
      const double v = x[j * d + c];
      if (arg[c] == kNone || v > out[c]) {
        out[c] = v;
        arg[c] = j;
      }
    }
  }
}

bool uses_attention_tokens(Variant v) {
  return v == Variant::attn_max || v == Variant::attn_attn;
}

void check_inputs(const Matrix& t, const EncoderParams& params) {
  params.validate();
  if (t.rows() < 2) throw ShapeError("contextual embeddings need [CLS] plus at least one token");
  if (t.cols() != params.d) {
    throw ShapeError("embedding width " + std::to_string(t.cols()) +
                     " does not match encoder hidden size " + std::to_string(params.d));
  }
  for (double x : t.data()) {
    if (!std::isfinite(x)) throw NumericError("non-finite value in contextual embeddings");
  }
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::cnn_cnn: return "cnn_cnn";
    case Variant::cnn_max: return "cnn_max";
    case Variant::attn_max: return "attn_max";
    case Variant::attn_attn: return "attn_attn";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ArgumentError("unknown encoder variant '" + std::string(name) +
                      "' (expected cnn_cnn, cnn_max, attn_max or attn_attn)");
}

EncoderParams EncoderParams::zeros(std::size_t d, std::size_t k) {
  EncoderParams p;
  p.d = d;
  p.k = k;
  p.token_conv = make_conv(d, k);
  p.span_conv = make_conv(d, k);
  p.token_attn = make_attn(d);
  p.span_attn = make_attn(d);
  return p;
}

EncoderParams EncoderParams::uniform(std::size_t d, std::size_t k, std::uint64_t seed,
                                     double scale) {
  EncoderParams p = zeros(d, k);
  SplitMix64 rng(seed);
  p.for_each_tensor([&](std::string_view, std::span<double> values) {
    for (double& x : values) x = rng.uniform(-scale, scale);
  });
  return p;
}

void EncoderParams::validate() const {
  if (d == 0) throw ShapeError("encoder hidden size must be positive");
  if (k % 2 == 0) throw ShapeError("kernel width must be odd");
  check_conv(token_conv, d, k, "token_conv");
  check_conv(span_conv, d, k, "span_conv");
  check_attn(token_attn, d, "token_attn");
  check_attn(span_attn, d, "span_attn");
  for_each_tensor([](std::string_view name, std::span<const double> values) {
    for (double x : values) {
      if (!std::isfinite(x)) throw NumericError("non-finite value in " + std::string(name));
    }
  });
}

std::uint64_t EncoderParams::fingerprint() const {
  std::uint64_t h = mix64(d * 31 + k);
  for_each_tensor([&](std::string_view, std::span<const double> values) {
    h = mix64(h ^ values.size());
    for (double x : values) h = mix64(h ^ std::bit_cast<std::uint64_t>(x));
  });
  return h;
}

SpanTensor gather_spans(const Matrix& t, const std::vector<Span>& boundaries,
                        const SpanLayout& layout) {
  if (layout.r < 1 || layout.l < 1) throw ArgumentError("r and l must be >= 1");
  SpanTensor out;
  out.r = layout.r;
  out.l = layout.l;
  out.d = t.cols();
  out.data.assign(out.r * out.l * out.d, 0.0);
  out.mask.assign(out.r * out.l, 0);
  out.lengths.assign(out.r, 0);
  out.source.assign(out.r * out.l, kNone);
  for (const Span& s : boundaries) {
    if (s.start == 0) throw ArgumentError("span boundaries must exclude position 0 ([CLS])");
    if (s.end > t.rows() || s.end <= s.start) {
      throw ArgumentError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                          ") is empty or outside the " + std::to_string(t.rows()) +
                          "-row embedding matrix");
    }
  }
  const std::size_t kept = std::min(boundaries.size(), out.r);
  for (std::size_t i = 0; i < kept; ++i) {
    const Span& s = boundaries[i];
    const std::size_t len = std::min(s.size(), out.l);
    for (std::size_t j = 0; j < len; ++j) {
      const auto src = t.row(s.start + j);
      std::copy(src.begin(), src.end(), out.data.begin() + (i * out.l + j) * out.d);
      out.mask[i * out.l + j] = 1;
      out.source[i * out.l + j] = s.start + j;
    }
    out.lengths[i] = len;
  }
  out.span_count = kept;
  if (kept == 0) throw EmptySpansError();
  return out;
}

// Implementation of forward/backward; a friend of ForwardCache.
struct EncoderPass {
  static SpanVectors token_stage(const SpanTensor& spans, const EncoderParams& params) {
    ForwardCache cache;
    stage1(spans, params, Variant::cnn_cnn, cache);
    return std::move(cache.stage1_);
  }

  static void stage1(const SpanTensor& spans, const EncoderParams& params, Variant variant,
                     ForwardCache& cache) {
    const std::size_t d = spans.d;
    cache.stage1_.c = Matrix(spans.r, d);
    cache.stage1_.valid.assign(spans.r, 0);
    cache.pre1_.assign(spans.r, {});
    cache.arg1_.assign(spans.r, {});
    cache.tanh1_.assign(spans.r, {});
    cache.alpha1_.assign(spans.r, {});
    for (std::size_t i = 0; i < spans.r; ++i) {
      const double* x = spans.data.data() + i * spans.l * d;
      const std::uint8_t* valid = spans.mask.data() + i * spans.l;
      auto out = cache.stage1_.c.row(i);
      if (uses_attention_tokens(variant)) {
        attn_forward(x, spans.l, d, valid, params.token_attn, out, cache.tanh1_[i],
                     cache.alpha1_[i]);
      } else {
        conv_max_forward(x, spans.l, valid, params.token_conv, out, cache.pre1_[i],
                         cache.arg1_[i]);
      }
      cache.stage1_.valid[i] = spans.lengths[i] > 0 ? 1 : 0;
    }
  }

  static std::vector<double> stage2(const EncoderParams& params, Variant variant,
                                    ForwardCache& cache) {
    const SpanVectors& c = cache.stage1_;
    const std::size_t d = c.c.cols();
    if (std::find(c.valid.begin(), c.valid.end(), 1) == c.valid.end()) {
      throw EmptySpansError();
    }
    std::vector<double> s(d, 0.0);
    const double* x = c.c.data().data();
    const std::size_t positions = c.c.rows();
    switch (variant) {
      case Variant::cnn_cnn:
        conv_max_forward(x, positions, c.valid.data(), params.span_conv, s, cache.pre2_,
                         cache.arg2_);
        break;
      case Variant::cnn_max:
      case Variant::attn_max:
        masked_max_forward(x, positions, d, c.valid.data(), s, cache.arg2_);
        break;
      case Variant::attn_attn:
        attn_forward(x, positions, d, c.valid.data(), params.span_attn, s, cache.tanh2_,
                     cache.alpha2_);
        break;
    }
    return s;
  }

  static EncoderOutput run(const Matrix& t, const std::vector<Span>& boundaries,
                           const EncoderParams& params, Variant variant,
                           const SpanLayout& layout) {
    check_inputs(t, params);
    EncoderOutput result;
    ForwardCache& cache = result.cache;
    cache.spans_ = gather_spans(t, boundaries, layout);
    stage1(cache.spans_, params, variant, cache);
    const auto s = stage2(params, variant, cache);
    result.representation = concat_cls(s, t);
    cache.variant_ = variant;
    cache.params_fingerprint_ = params.fingerprint();
    cache.m_ = t.rows();
    cache.d_ = t.cols();
    cache.valid_ = true;
    return result;
  }

  static EncoderGradients adjoint(const ForwardCache& cache, const EncoderParams& params,
                                  std::span<const double> upstream) {
    if (!cache.valid_) throw CacheError("backward called without a forward cache");
    if (cache.params_fingerprint_ != params.fingerprint()) {
      throw CacheError("forward cache is stale: parameters changed since forward");
    }
    const std::size_t d = cache.d_;
    if (upstream.size() != 2 * d) {
      throw ShapeError("upstream gradient has length " + std::to_string(upstream.size()) +
                       ", expected " + std::to_string(2 * d));
    }
    EncoderGradients g;
    g.params = EncoderParams::zeros(d, params.k);
    g.inputs = Matrix(cache.m_, d);
    // [CLS] enters only through the concatenation.
    std::copy(upstream.begin() + d, upstream.end(), g.inputs.row(0).begin());

    const auto ds = upstream.first(d);
    const SpanVectors& c = cache.stage1_;
    const SpanTensor& spans = cache.spans_;
    Matrix dc(c.c.rows(), d);
    const double* cx = c.c.data().data();
    switch (cache.variant_) {
      case Variant::cnn_cnn:
        conv_max_backward(cx, c.c.rows(), c.valid.data(), params.span_conv, cache.pre2_,
                          cache.arg2_, ds, g.params.span_conv, dc.data().data());
        break;
      case Variant::cnn_max:
      case Variant::attn_max:
        for (std::size_t o = 0; o < d; ++o) {
          if (cache.arg2_[o] != kNone) dc(cache.arg2_[o], o) += ds[o];
        }
        break;
      case Variant::attn_attn:
        attn_backward(cx, c.c.rows(), d, c.valid.data(), params.span_attn, cache.tanh2_,
                      cache.alpha2_, ds, g.params.span_attn, dc.data().data());
        break;
    }

    std::vector<double> dspan(spans.l * d);
    for (std::size_t i = 0; i < spans.r; ++i) {
      if (!c.valid[i]) continue;
      std::fill(dspan.begin(), dspan.end(), 0.0);
      const double* x = spans.data.data() + i * spans.l * d;
      const std::uint8_t* valid = spans.mask.data() + i * spans.l;
      if (uses_attention_tokens(cache.variant_)) {
        attn_backward(x, spans.l, d, valid, params.token_attn, cache.tanh1_[i],
                      cache.alpha1_[i], dc.row(i), g.params.token_attn, dspan.data());
      } else {
        conv_max_backward(x, spans.l, valid, params.token_conv, cache.pre1_[i],
                          cache.arg1_[i], dc.row(i), g.params.token_conv, dspan.data());
      }
      for (std::size_t j = 0; j < spans.l; ++j) {
        const std::size_t src = spans.source[i * spans.l + j];
        if (src == kNone) continue;
        auto dst = g.inputs.row(src);
        for (std::size_t k = 0; k < d; ++k) dst[k] += dspan[j * d + k];
      }
    }
    return g;
  }
};

SpanVectors token_stage(const SpanTensor& spans, const EncoderParams& params) {
  params.validate();
  if (spans.d != params.d) throw ShapeError("span tensor width does not match encoder");
  return EncoderPass::token_stage(spans, params);
}

std::vector<double> span_stage(const SpanVectors& spans, const EncoderParams& params) {
  params.validate();
  if (spans.c.cols() != params.d || spans.valid.size() != spans.c.rows()) {
    throw ShapeError("span vectors do not match encoder");
  }
  if (std::find(spans.valid.begin(), spans.valid.end(), 1) == spans.valid.end()) {
    throw EmptySpansError();
  }
  std::vector<double> s(params.d);
  std::vector<double> pre;
  std::vector<std::size_t> arg;
  conv_max_forward(spans.c.data().data(), spans.c.rows(), spans.valid.data(), params.span_conv,
                   s, pre, arg);
  return s;
}

std::vector<double> self_attentive_pool(const Matrix& h, std::span<const std::uint8_t> valid,
                                        const AttentionParams& params) {
  if (h.cols() != params.d || params.weight.size() != params.hidden * params.d ||
      params.v.size() != params.hidden || valid.size() != h.rows()) {
    throw ShapeError("attention parameters do not match input width");
  }
  std::vector<double> out(h.cols());
  std::vector<double> u;
  std::vector<double> alpha;
  if (!attn_forward(h.data().data(), h.rows(), h.cols(), valid.data(), params, out, u, alpha)) {
    throw EmptySpansError();
  }
  return out;
}

std::vector<double> self_attentive_pool(const Matrix& h, const AttentionParams& params) {
  const std::vector<std::uint8_t> valid(h.rows(), 1);
  return self_attentive_pool(h, valid, params);
}

std::vector<double> concat_cls(std::span<const double> s, const Matrix& t) {
  if (t.rows() == 0 || s.size() != t.cols()) {
    throw ShapeError("span vector width " + std::to_string(s.size()) +
                     " does not match [CLS] width " + std::to_string(t.cols()));
  }
  std::vector<double> out(s.begin(), s.end());
  const auto cls = t.row(0);
  out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

Matrix encode_token_level(const SpanTensor& spans, const EncoderParams& params) {
  return token_stage(spans, params).c;
}

EncoderOutput forward(const Matrix& t, const std::vector<Span>& boundaries,
                      const EncoderParams& params, Variant variant, const SpanLayout& layout) {
  return EncoderPass::run(t, boundaries, params, variant, layout);
}

EncoderGradients backward(const ForwardCache& cache, const EncoderParams& params,
                          std::span<const double> upstream) {
  return EncoderPass::adjoint(cache, params, upstream);
}

GradCheckReport grad_check(const GradCheckOptions& o) {
  if (!(o.epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  SplitMix64 rng(o.seed);

  // Enough tokens to overflow both r and l, so truncation paths are covered.
  std::vector<Span> boundaries;
  std::size_t pos = 1;
  const std::size_t spans_wanted = o.r + 1;
  for (std::size_t i = 0; i < spans_wanted; ++i) {
    const std::size_t len = 1 + rng.below(o.l + 1);
    boundaries.push_back({pos, pos + len});
    pos += len;
  }
  Matrix t(pos, o.d);
  for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);

  EncoderParams params = EncoderParams::uniform(o.d, o.k, rng.next(), 0.5);
  std::vector<double> proj(2 * o.d);
  for (double& x : proj) x = rng.uniform(-1.0, 1.0);

  const SpanLayout layout{o.r, o.l};
  const auto objective = [&](const Matrix& tt, const EncoderParams& pp) {
    const auto rep = forward(tt, boundaries, pp, o.variant, layout).representation;
    double v = 0.0;
    for (std::size_t i = 0; i < rep.size(); ++i) v += proj[i] * rep[i];
    return v;
  };

  const auto out = forward(t, boundaries, params, o.variant, layout);
  const auto grads = backward(out.cache, params, proj);

  GradCheckReport report;
  const auto compare = [&](double analytic, double numeric, const std::string& where) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / scale;
    ++report.checked;
    if (report.worst.empty() || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst = where;
    }
  };

  // Parameters, tensor by tensor. Only the tensors the variant uses carry a
  // gradient, but every tensor is checked: unused ones must be exactly zero.
  std::vector<std::span<const double>> analytic;
  grads.params.for_each_tensor(
      [&](std::string_view, std::span<const double> values) { analytic.push_back(values); });
  std::size_t tensor = 0;
  EncoderParams probe = params;
  probe.for_each_tensor([&](std::string_view name, std::span<double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + o.epsilon;
      const double up = objective(t, probe);
      values[i] = saved - o.epsilon;
      const double down = objective(t, probe);
      values[i] = saved;
      compare(analytic[tensor][i], (up - down) / (2.0 * o.epsilon),
              std::string(name) + "[" + std::to_string(i) + "]");
    }
    ++tensor;
  });

  Matrix probe_t = t;
  for (std::size_t i = 0; i < t.data().size(); ++i) {
    double& x = probe_t.data()[i];
    const double saved = x;
    x = saved + o.epsilon;
    const double up = objective(probe_t, params);
    x = saved - o.epsilon;
    const double down = objective(probe_t, params);
    x = saved;
    compare(grads.inputs.data()[i], (up - down) / (2.0 * o.epsilon),
            "T[" + std::to_string(i / o.d) + "," + std::to_string(i % o.d) + "]");
  }

  report.passed = report.max_relative_error < o.tolerance;
  return report;
}

}  // namespace spanft

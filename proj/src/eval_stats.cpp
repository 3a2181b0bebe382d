#include "spanft/eval_stats.hpp"

#include <algorithm>
#include <cmath>

#include "spanft/error.hpp"

namespace spanft {
namespace {

void check_pair(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("length mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  if (a.empty()) throw EmptyInputError("metrics need at least one example");
}

void check_binary(std::span<const int> values, const char* what) {
  for (int v : values) {
    if (v != 0 && v != 1) {
      throw ArgumentError(std::string(what) + " must be binary (0/1), got " + std::to_string(v));
    }
  }
}

struct Confusion {
  double tp = 0, tn = 0, fp = 0, fn = 0;
};

Confusion confusion(std::span<const int> preds, std::span<const int> labels) {
  Confusion m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1;
    const bool l = labels[i] == 1;
    if (p && l) m.tp += 1;
    else if (p) m.fp += 1;
    else if (l) m.fn += 1;
    else m.tn += 1;
  }
  return m;
}

}  // namespace

ClassificationMetrics classification_metrics(std::span<const int> preds,
                                             std::span<const int> labels) {
  check_pair(preds, labels);
  ClassificationMetrics out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());

  const Confusion m = confusion(preds, labels);
  const double precision = m.tp + m.fp > 0 ? m.tp / (m.tp + m.fp) : 0.0;
  const double recall = m.tp + m.fn > 0 ? m.tp / (m.tp + m.fn) : 0.0;
  out.f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  return out;
}

double matthews_corr(std::span<const int> preds, std::span<const int> labels) {
  check_pair(preds, labels);
  check_binary(preds, "predictions");
  check_binary(labels, "labels");
  const Confusion m = confusion(preds, labels);
  const double denom = (m.tp + m.fp) * (m.tp + m.fn) * (m.tn + m.fp) * (m.tn + m.fn);
  if (denom == 0.0) return 0.0;
  return (m.tp * m.tn - m.fp * m.fn) / std::sqrt(denom);
}

double pearson_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson_corr: length mismatch");
  if (x.size() < 2) throw ArgumentError("pearson_corr needs at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson_corr: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

Discordance discordance(std::span<const int> labels, std::span<const int> preds_a,
                        std::span<const int> preds_b) {
  if (labels.size() != preds_a.size() || labels.size() != preds_b.size()) {
    throw ArgumentError("paired predictions must have equal lengths");
  }
  check_binary(labels, "labels");
  check_binary(preds_a, "predictions");
  check_binary(preds_b, "predictions");
  Discordance d;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a = preds_a[i] == labels[i];
    const bool b = preds_b[i] == labels[i];
    if (a && !b) ++d.a_only;
    if (!a && b) ++d.b_only;
  }
  return d;
}

double mcnemar_exact_p(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  if (n == 0) return 1.0;
  const std::uint64_t k_max = std::min(b, c);
  double tail = 0.0;
  if (n < 60) {
    // Exact integer arithmetic where the binomial coefficients fit.
    std::uint64_t choose = 1;
    std::uint64_t sum = 0;
    for (std::uint64_t k = 0; k <= k_max; ++k) {
      if (k > 0) choose = choose * (n - k + 1) / k;
      sum += choose;
    }
    tail = std::ldexp(static_cast<double>(sum), -static_cast<int>(n));
  } else {
    for (std::uint64_t k = 0; k <= k_max; ++k) {
      const double log_term = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                              std::lgamma(static_cast<double>(n - k) + 1.0) -
                              static_cast<double>(n) * std::log(2.0);
      tail += std::exp(log_term);
    }
  }
  return std::min(1.0, 2.0 * tail);
}

double mcnemar_chi_square_p(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  if (n == 0) return 1.0;
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
  const double stat = diff * diff / static_cast<double>(n);
  // Survival function of chi-square with 1 degree of freedom.
  return std::erfc(std::sqrt(stat / 2.0));
}

McNemarResult mcnemar_test(std::uint64_t b, std::uint64_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  if (b + c == 0) {
    r.p_value = 1.0;
    r.method = McNemarMethod::no_discordance;
  } else if (b + c < kMcNemarExactLimit) {
    r.p_value = mcnemar_exact_p(b, c);
    r.method = McNemarMethod::exact_binomial;
  } else {
    r.p_value = mcnemar_chi_square_p(b, c);
    r.method = McNemarMethod::chi_square_corrected;
  }
  return r;
}

McNemarResult mcnemar_test(std::span<const int> labels, std::span<const int> preds_a,
                           std::span<const int> preds_b) {
  const Discordance d = discordance(labels, preds_a, preds_b);
  return mcnemar_test(d.a_only, d.b_only);
}

std::string method_name(McNemarMethod m) {
  switch (m) {
    case McNemarMethod::exact_binomial: return "exact_binomial";
    case McNemarMethod::chi_square_corrected: return "chi_square_corrected";
    case McNemarMethod::no_discordance: return "no_discordance";
  }
  return "unknown";
}

}  // namespace spanft

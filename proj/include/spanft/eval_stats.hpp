#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace spanft {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // positive class 1
};

// EmptyInputError for empty input, ArgumentError for a length mismatch.
ClassificationMetrics classification_metrics(std::span<const int> preds,
                                             std::span<const int> labels);

// Binary Matthews correlation; 0 when any marginal is empty.
double matthews_corr(std::span<const int> preds, std::span<const int> labels);

// Sample Pearson correlation. DegenerateInputError on zero variance,
// ArgumentError for fewer than 2 points or a length mismatch.
double pearson_corr(std::span<const double> x, std::span<const double> y);

// Discordant counts between two classifiers on the same examples.
struct Discordance {
  std::uint64_t a_only = 0;  // b: A correct, B wrong
  std::uint64_t b_only = 0;  // c: A wrong, B correct
};

// ArgumentError on unequal lengths or non-binary values.
Discordance discordance(std::span<const int> labels, std::span<const int> preds_a,
                        std::span<const int> preds_b);

enum class McNemarMethod { exact_binomial, chi_square_corrected, no_discordance };

struct McNemarResult {
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  double p_value = 1.0;
  McNemarMethod method = McNemarMethod::no_discordance;
};

inline constexpr std::uint64_t kMcNemarExactLimit = 25;

// Exact two-sided binomial below kMcNemarExactLimit discordant pairs,
// continuity-corrected chi-square (1 dof) otherwise, 1 when b + c == 0.
McNemarResult mcnemar_test(std::uint64_t b, std::uint64_t c);
McNemarResult mcnemar_test(std::span<const int> labels, std::span<const int> preds_a,
                           std::span<const int> preds_b);

// Both branches, for inspection.
double mcnemar_exact_p(std::uint64_t b, std::uint64_t c);
double mcnemar_chi_square_p(std::uint64_t b, std::uint64_t c);

std::string method_name(McNemarMethod m);

}  // namespace spanft

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "care/encoder.hpp"

namespace care::metrics {

using Tokens = std::vector<std::string>;

/// Splits on whitespace; every CJK code point becomes its own token.
Tokens tokenize(std::string_view text);

/// BP * exp(sum_n 1/N log p_n) with clipped n-gram precisions. Zero when any
/// p_n is zero or the candidate is empty. With `smoothing`, zero counts get
/// add-one smoothing for n > 1 instead.
double bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n, bool smoothing = false);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// (1 + beta^2) R P / (R + beta^2 P) over the LCS. Empty reference: nullopt.
std::optional<double> rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 8.0);

enum class IccK {
    Groups,        // k = number of groups
    PerGroupSize,  // k = measurements per group, the usual ICC(1,1)
};

/// (MS_b - MS_w) / (MS_b + (k - 1) MS_w) from a one-way decomposition.
/// nullopt when the denominator is zero.
std::optional<double> icc(const std::vector<std::vector<double>>& groups, IccK convention = IccK::Groups);

/// Greedy-matching cosine similarity over encoder token vectors. This is a
/// lexical stand-in and is NOT BERTScore.
double embed_sim(const Tokens& candidate, const Tokens& reference, const TextEncoder& encoder);

struct MetricReport {
    double bleu[4] = {0, 0, 0, 0};
    double bleu_avg = 0.0;
    std::optional<double> rouge_l;  // absent when every reference is empty
    std::optional<double> embed_sim;
    std::size_t pairs = 0;
    std::size_t rouge_pairs = 0;
    std::size_t empty_candidates = 0;
};

/// Per-pair metrics averaged arithmetically.
MetricReport evaluate_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                             const TextEncoder* encoder = nullptr, double beta = 8.0);

nlohmann::ordered_json report_to_json(const MetricReport& report);

}  // namespace care::metrics

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gme/error.hpp"

namespace gme {

/// 1 if the truth id appears in the first k ranked ids, else 0.
inline int recall_at_k(std::span<const std::string> ranked_ids, const std::string& truth_id,
                       std::size_t k) {
    const std::size_t limit = std::min(k, ranked_ids.size());
    for (std::size_t i = 0; i < limit; ++i)
        if (ranked_ids[i] == truth_id) return 1;
    return 0;
}

/// Percentage of queries whose truth id is in the top k.
inline double recall_at_k_percent(std::span<const int> hits) {
    if (hits.empty()) return 0.0;
    double total = 0.0;
    for (int h : hits) total += h;
    return 100.0 * total / static_cast<double>(hits.size());
}

/// Reciprocal rank of the truth id; 0 when absent.
inline double mrr(std::span<const std::string> ranked_ids, const std::string& truth_id) {
    for (std::size_t i = 0; i < ranked_ids.size(); ++i)
        if (ranked_ids[i] == truth_id) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

inline double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

/**
 * Sentence BLEU with uniform weights up to max_n, clipped n-gram precision
 * and the standard brevity penalty. Zero clipped counts are smoothed to 1e-9
 * before the geometric mean; orders longer than the candidate are dropped
 * from the mean (effective-order BLEU). An empty candidate scores 0.
 */
inline double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
                   std::size_t max_n) {
    if (max_n < 1) throw InvalidArgument("bleu: max_n must be >= 1");
    if (candidate.empty()) return 0.0;
    constexpr double kEps = 1e-9;
    double log_precision_sum = 0.0;
    const std::size_t effective_n = std::min(max_n, candidate.size());
    for (std::size_t n = 1; n <= effective_n; ++n) {
        std::map<std::vector<std::string>, std::size_t> ref_counts;
        if (reference.size() >= n)
            for (std::size_t i = 0; i + n <= reference.size(); ++i)
                ++ref_counts[std::vector<std::string>(reference.begin() + static_cast<std::ptrdiff_t>(i),
                                                      reference.begin() + static_cast<std::ptrdiff_t>(i + n))];
        std::map<std::vector<std::string>, std::size_t> cand_counts;
        const std::size_t total = candidate.size() - n + 1;
        for (std::size_t i = 0; i + n <= candidate.size(); ++i)
            ++cand_counts[std::vector<std::string>(candidate.begin() + static_cast<std::ptrdiff_t>(i),
                                                   candidate.begin() + static_cast<std::ptrdiff_t>(i + n))];
        double clipped = 0.0;
        for (const auto& [gram, count] : cand_counts) {
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) clipped += static_cast<double>(std::min(count, it->second));
        }
        if (clipped == 0.0) clipped = kEps;
        log_precision_sum += std::log(clipped / static_cast<double>(total));
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_precision_sum / static_cast<double>(effective_n));
}

/**
 * Mean squared pairwise distance over a set of pooled embeddings, self-pairs
 * included: (1/|R|^2) sum_r sum_r' ||e(r) - e(r')||^2.
 */
inline double diversity(std::span<const std::vector<double>> pooled) {
    if (pooled.empty()) return 0.0;
    double total = 0.0;
    for (const std::vector<double>& a : pooled)
        for (const std::vector<double>& b : pooled) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.size(); ++j) {
                const double diff = a[j] - b[j];
                s += diff * diff;
            }
            total += s;
        }
    const double n = static_cast<double>(pooled.size());
    return total / (n * n);
}

}  // namespace gme

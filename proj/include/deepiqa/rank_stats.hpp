#pragma once

// Tie-aware rank correlation between model distances and opinion scores.

#include <span>
#include <string_view>
#include <vector>

namespace deepiqa {

/// Direction of the opinion score. TID and KADID publish higher-is-better MOS.
enum class Polarity { higher_is_better, higher_is_worse };

std::string_view to_string(Polarity polarity);
Polarity parse_polarity(std::string_view name);

/// Fractional ranks in [1, N]; tied values share the mean of the ranks they span.
std::vector<double> rank_with_ties(std::span<const double> values);

/// Centered product-moment correlation. Throws on length mismatch, N < 2,
/// non-finite input or a zero-variance series.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of fractional ranks. A constant series has no
/// defined correlation and throws.
double spearman(std::span<const double> x, std::span<const double> y);

/// Spearman rho signed so that a metric agreeing with humans scores positively:
/// -rho against higher-is-better scores, +rho against higher-is-worse scores.
double correlation_score(std::span<const double> distances, std::span<const double> mos,
                         Polarity polarity);

}  // namespace deepiqa

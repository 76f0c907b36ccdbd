#include "deepiqa/rank_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deepiqa/error.hpp"

namespace deepiqa {

std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::higher_is_better ? "higher_is_better" : "higher_is_worse";
}

Polarity parse_polarity(std::string_view name) {
  if (name == "higher_is_better") return Polarity::higher_is_better;
  if (name == "higher_is_worse") return Polarity::higher_is_worse;
  throw Error("unknown polarity '" + std::string(name) + "'");
}

namespace {

void require_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error("non-finite value at position " + std::to_string(i));
    }
  }
}

void require_paired(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error("series lengths differ: " + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error("correlation needs at least two observations");
}

}  // namespace

std::vector<double> rank_with_ties(std::span<const double> values) {
  require_finite(values);
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold rank i+1..j; ties get their mean.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_paired(x, y);
  require_finite(x);
  require_finite(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw Error("undefined correlation: a series has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_paired(x, y);
  const auto rx = rank_with_ties(x);
  const auto ry = rank_with_ties(y);
  const auto constant = [](const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
  };
  if (constant(rx) || constant(ry)) {
    throw Error("undefined correlation: a series is constant");
  }
  return pearson(rx, ry);
}

double correlation_score(std::span<const double> distances, std::span<const double> mos,
                         Polarity polarity) {
  const double rho = spearman(distances, mos);
  return polarity == Polarity::higher_is_better ? -rho : rho;
}

}  // namespace deepiqa

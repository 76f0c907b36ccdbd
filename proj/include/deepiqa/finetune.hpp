#pragma once

// Channel-weight fitting on frozen features. Per-channel squared distances are
// precomputed once per pair; the fit then only touches that table.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepiqa/archive.hpp"
#include "deepiqa/dataset.hpp"
#include "deepiqa/distance.hpp"
#include "deepiqa/rank_stats.hpp"

namespace deepiqa {

struct LayerSpan {
  std::string layer;
  std::size_t offset = 0;
  std::size_t channels = 0;
  friend bool operator==(const LayerSpan&, const LayerSpan&) = default;
};

/// rows x cols nonnegative contributions, row-major, one row per pair and one
/// column per channel of the concatenated layers.
struct ContributionTable {
  std::vector<LayerSpan> spans;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> mos;

  static ContributionTable make(std::vector<LayerSpan> spans, std::size_t rows);

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }

  /// Throws unless the shape, spans and nonnegativity invariants hold.
  void validate() const;
};

ContributionTable build_contribution_table(const FeatureArchive& archive,
                                           std::span<const PairRecord> records,
                                           std::span<const std::string> layers);

enum class Surrogate { pearson_on_distance, pearson_on_log_distance };

std::string_view to_string(Surrogate surrogate);
Surrogate parse_surrogate(std::string_view name);

struct FitConfig {
  int iterations = 200;
  double step = 1.0;  // largest weight change per iteration, before backtracking
  // Recorded for provenance; the full-batch optimizer draws no random numbers.
  std::uint64_t seed = 2013;
  Surrogate surrogate = Surrogate::pearson_on_distance;
};

struct FitReport {
  std::vector<double> surrogate_trace;  // initial value, then one per iteration
  double initial_score = 0.0;           // training Spearman score, all-ones weights
  double final_score = 0.0;             // training Spearman score, returned weights
  std::size_t accepted_steps = 0;
  bool reverted = false;  // last iterate ranked worse than all-ones and was dropped
};

struct FitResult {
  ChannelWeights weights;
  FitReport report;
};

/// Projected gradient ascent of the Pearson surrogate from all-ones weights,
/// with backtracking so the surrogate never decreases.
FitResult fit_channel_weights(const ContributionTable& table, Polarity polarity,
                              const FitConfig& config);

std::vector<double> flatten_weights(const ChannelWeights& weights,
                                    std::span<const LayerSpan> spans);
ChannelWeights unflatten_weights(std::span<const double> flat, std::span<const LayerSpan> spans);

/// sqrt(sum_c w_c * contrib_c) for one table row.
double apply_weights(std::span<const double> row, std::span<const LayerSpan> spans,
                     const ChannelWeights& weights);
/// Weighted concatenated euclidean distance over `layers` for a pair of images.
double apply_weights(const LayerMaps& x, const LayerMaps& y, std::span<const std::string> layers,
                     const ChannelWeights& weights);

/// Distances for every table row under flat weights.
std::vector<double> weighted_distances(const ContributionTable& table,
                                       std::span<const double> flat_weights);

struct LayerFitSummary {
  std::vector<std::string> layers;
  FitReport report;
};

/// Serialized weights with the settings and training database that produced them.
struct WeightsDocument {
  ChannelWeights weights;
  std::string training_database;
  Polarity polarity = Polarity::higher_is_better;
  FitConfig config;
  bool concatenate = false;
  std::vector<LayerFitSummary> fits;
};

std::string weights_to_text(const WeightsDocument& doc);
WeightsDocument weights_from_text(std::string_view text);
void save_weights(const std::filesystem::path& path, const WeightsDocument& doc);
WeightsDocument load_weights(const std::filesystem::path& path);

}  // namespace deepiqa

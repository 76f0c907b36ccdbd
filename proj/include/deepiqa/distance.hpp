#pragma once

// Feature-space distances between two images at one or more layers:
// full euclidean, spatial means, means + standard deviations, and Gram
// matrices, with optional per-channel weights and layer concatenation.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepiqa/archive.hpp"

namespace deepiqa {

enum class Strategy { full, mean, mean_sigma, gram };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

/// Per-channel spatial mean and population standard deviation.
struct ChannelMoments {
  std::vector<double> means;
  std::vector<double> sigmas;
};

/// Symmetric C x C channel co-activation matrix, stored row-major.
class GramMatrix {
 public:
  GramMatrix(std::size_t channels, std::vector<double> entries);

  std::size_t channels() const { return channels_; }
  double at(std::size_t i, std::size_t j) const { return entries_[i * channels_ + j]; }
  std::span<const double> entries() const { return entries_; }

 private:
  std::size_t channels_;
  std::vector<double> entries_;
};

enum class GramNormalization {
  spatial_mean,  // divide by H*W
  none,
};

/// Nonnegative per-channel weights keyed by layer name, in insertion order.
class ChannelWeights {
 public:
  void set(std::string layer, std::vector<double> weights);
  const std::vector<double>* find(std::string_view layer) const;
  const std::vector<double>& at(std::string_view layer) const;
  const std::vector<std::pair<std::string, std::vector<double>>>& layers() const {
    return layers_;
  }
  friend bool operator==(const ChannelWeights&, const ChannelWeights&) = default;

 private:
  std::vector<std::pair<std::string, std::vector<double>>> layers_;
};

struct ReadoutConfig {
  Strategy strategy = Strategy::full;
  std::vector<std::string> layers;
  bool concatenate = false;
  std::optional<ChannelWeights> weights;
  GramNormalization gram_normalization = GramNormalization::spatial_mean;
  // Scales each layer's squared distance by 1 / (length of its summary
  // vector), i.e. 1/(HWC) for the full readout.
  bool normalize_layers = false;

  std::string summary() const;
};

double euclidean_distance(const FeatureMap& a, const FeatureMap& b);

ChannelMoments spatial_moments(const FeatureMap& a);
double mean_distance(const FeatureMap& a, const FeatureMap& b);
double mean_sigma_distance(const FeatureMap& a, const FeatureMap& b);

GramMatrix gram_matrix(const FeatureMap& a,
                       GramNormalization normalization = GramNormalization::spatial_mean);
/// Frobenius distance between Gram matrices. Only channel counts must agree.
double gram_distance(const FeatureMap& a, const FeatureMap& b,
                     GramNormalization normalization = GramNormalization::spatial_mean);

/// Sum over spatial positions of squared differences, one entry per channel.
std::vector<double> per_channel_squared_distances(const FeatureMap& a, const FeatureMap& b);

/// Per-channel squared contributions under a strategy: for `full` the same as
/// per_channel_squared_distances, for `mean` (dmu_c)^2, for `mean_sigma`
/// (dmu_c)^2 + (dsigma_c)^2. Gram entries couple channel pairs and are refused.
std::vector<double> per_channel_contributions(const FeatureMap& a, const FeatureMap& b,
                                              Strategy strategy);

/// sqrt(sum_c weights[c] * contribs[c]).
double weighted_distance(std::span<const double> contribs, std::span<const double> weights);

/// Squared distance for one layer under the configured strategy, weights and
/// normalization. `layer` selects the weight vector.
double squared_readout_distance(const FeatureMap& a, const FeatureMap& b,
                                const ReadoutConfig& config, std::string_view layer);

using LayerMaps = std::map<std::string, FeatureMap, std::less<>>;

struct ReadoutDistance {
  std::optional<double> concatenated;                   // set when concatenating
  std::vector<std::pair<std::string, double>> per_layer;  // set otherwise, config order
};

ReadoutDistance multi_layer_distance(const LayerMaps& x, const LayerMaps& y,
                                     const ReadoutConfig& config);

}  // namespace deepiqa

#include "deepiqa/distance.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "deepiqa/error.hpp"

namespace deepiqa {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::full: return "full";
    case Strategy::mean: return "mean";
    case Strategy::mean_sigma: return "mean_sigma";
    case Strategy::gram: return "gram";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "full") return Strategy::full;
  if (name == "mean") return Strategy::mean;
  if (name == "mean_sigma") return Strategy::mean_sigma;
  if (name == "gram") return Strategy::gram;
  throw Error("unknown readout strategy '" + std::string(name) + "'");
}

GramMatrix::GramMatrix(std::size_t channels, std::vector<double> entries)
    : channels_(channels), entries_(std::move(entries)) {
  if (entries_.size() != channels_ * channels_) {
    throw Error("gram matrix needs C*C entries");
  }
}

void ChannelWeights::set(std::string layer, std::vector<double> weights) {
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (!std::isfinite(weights[c]) || weights[c] < 0.0) {
      throw Error("weight " + std::to_string(c) + " of layer '" + layer +
                  "' is negative or non-finite");
    }
  }
  for (auto& [name, values] : layers_) {
    if (name == layer) {
      values = std::move(weights);
      return;
    }
  }
  layers_.emplace_back(std::move(layer), std::move(weights));
}

const std::vector<double>* ChannelWeights::find(std::string_view layer) const {
  for (const auto& [name, values] : layers_) {
    if (name == layer) return &values;
  }
  return nullptr;
}

const std::vector<double>& ChannelWeights::at(std::string_view layer) const {
  const auto* w = find(layer);
  if (w == nullptr) throw Error("no weights for layer '" + std::string(layer) + "'");
  return *w;
}

std::string ReadoutConfig::summary() const {
  std::ostringstream os;
  os << to_string(strategy) << ";layers=";
  for (std::size_t i = 0; i < layers.size(); ++i) os << (i ? "," : "") << layers[i];
  os << ";concat=" << (concatenate ? 1 : 0) << ";weights=" << (weights ? "yes" : "none");
  if (strategy == Strategy::gram && gram_normalization == GramNormalization::none) {
    os << ";gram=unnormalized";
  }
  if (normalize_layers) os << ";layer_norm=1";
  return os.str();
}

namespace {

void require_same_shape(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) {
    throw Error("shape mismatch: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
}

void require_same_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.channels() != b.channels()) {
    throw Error("channel mismatch: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
}

double squared_norm_of_difference(std::span<const double> x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum;
}

double squared_euclidean(const FeatureMap& a, const FeatureMap& b) {
  const auto x = a.values();
  const auto y = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sum += d * d;
  }
  return sum;
}

double squared_moment_distance(const FeatureMap& a, const FeatureMap& b, bool with_sigmas) {
  const auto ma = spatial_moments(a);
  const auto mb = spatial_moments(b);
  double sum = squared_norm_of_difference(ma.means, mb.means);
  if (with_sigmas) sum += squared_norm_of_difference(ma.sigmas, mb.sigmas);
  return sum;
}

double squared_gram_distance(const FeatureMap& a, const FeatureMap& b,
                             GramNormalization normalization) {
  require_same_channels(a, b);
  const auto ga = gram_matrix(a, normalization);
  const auto gb = gram_matrix(b, normalization);
  return squared_norm_of_difference(ga.entries(), gb.entries());
}

double summary_length(const Shape& shape, Strategy strategy) {
  const auto c = static_cast<double>(shape.channels);
  switch (strategy) {
    case Strategy::full: return static_cast<double>(shape.elements());
    case Strategy::mean: return c;
    case Strategy::mean_sigma: return 2.0 * c;
    case Strategy::gram: return c * c;
  }
  return 1.0;
}

}  // namespace

double euclidean_distance(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b);
  return std::sqrt(squared_euclidean(a, b));
}

ChannelMoments spatial_moments(const FeatureMap& a) {
  const std::size_t channels = a.channels();
  const std::size_t positions = a.shape().spatial();
  const auto values = a.values();
  ChannelMoments m{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t c = 0; c < channels; ++c) m.means[c] += values[p * channels + c];
  }
  for (auto& mean : m.means) mean /= static_cast<double>(positions);
  // Second pass around the mean keeps the variance free of cancellation.
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = values[p * channels + c] - m.means[c];
      m.sigmas[c] += d * d;
    }
  }
  for (auto& s : m.sigmas) s = std::sqrt(s / static_cast<double>(positions));
  return m;
}

double mean_distance(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b);
  return std::sqrt(squared_moment_distance(a, b, false));
}

double mean_sigma_distance(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b);
  return std::sqrt(squared_moment_distance(a, b, true));
}

GramMatrix gram_matrix(const FeatureMap& a, GramNormalization normalization) {
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto channels = static_cast<Eigen::Index>(a.channels());
  const auto positions = static_cast<Eigen::Index>(a.shape().spatial());
  const Eigen::Map<const RowMajor> features(a.values().data(), positions, channels);
  const Eigen::MatrixXd x = features.cast<double>();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(channels, channels);
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  if (normalization == GramNormalization::spatial_mean) g /= static_cast<double>(positions);

  std::vector<double> entries(static_cast<std::size_t>(channels * channels));
  for (Eigen::Index i = 0; i < channels; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = g(i, j);
      entries[static_cast<std::size_t>(i * channels + j)] = v;
      entries[static_cast<std::size_t>(j * channels + i)] = v;
    }
  }
  return GramMatrix(a.channels(), std::move(entries));
}

double gram_distance(const FeatureMap& a, const FeatureMap& b, GramNormalization normalization) {
  return std::sqrt(squared_gram_distance(a, b, normalization));
}

std::vector<double> per_channel_squared_distances(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b);
  const std::size_t channels = a.channels();
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> out(channels, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    out[i % channels] += d * d;
  }
  return out;
}

std::vector<double> per_channel_contributions(const FeatureMap& a, const FeatureMap& b,
                                              Strategy strategy) {
  switch (strategy) {
    case Strategy::full:
      return per_channel_squared_distances(a, b);
    case Strategy::mean:
    case Strategy::mean_sigma: {
      require_same_shape(a, b);
      const auto ma = spatial_moments(a);
      const auto mb = spatial_moments(b);
      std::vector<double> out(a.channels());
      for (std::size_t c = 0; c < out.size(); ++c) {
        const double dm = ma.means[c] - mb.means[c];
        out[c] = dm * dm;
        if (strategy == Strategy::mean_sigma) {
          const double ds = ma.sigmas[c] - mb.sigmas[c];
          out[c] += ds * ds;
        }
      }
      return out;
    }
    case Strategy::gram:
      break;
  }
  throw Error("per-channel weights are not defined for the gram readout");
}

double weighted_distance(std::span<const double> contribs, std::span<const double> weights) {
  if (contribs.size() != weights.size()) {
    throw Error("weight vector has " + std::to_string(weights.size()) + " entries, expected " +
                std::to_string(contribs.size()));
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < contribs.size(); ++c) {
    if (!(weights[c] >= 0.0)) {
      throw Error("weight " + std::to_string(c) + " is negative");
    }
    sum += weights[c] * contribs[c];
  }
  return std::sqrt(sum);
}

double squared_readout_distance(const FeatureMap& a, const FeatureMap& b,
                                const ReadoutConfig& config, std::string_view layer) {
  double squared = 0.0;
  if (config.weights) {
    const auto& w = config.weights->at(layer);
    const auto d = weighted_distance(per_channel_contributions(a, b, config.strategy), w);
    squared = d * d;
  } else {
    switch (config.strategy) {
      case Strategy::full:
        require_same_shape(a, b);
        squared = squared_euclidean(a, b);
        break;
      case Strategy::mean:
        require_same_shape(a, b);
        squared = squared_moment_distance(a, b, false);
        break;
      case Strategy::mean_sigma:
        require_same_shape(a, b);
        squared = squared_moment_distance(a, b, true);
        break;
      case Strategy::gram:
        squared = squared_gram_distance(a, b, config.gram_normalization);
        break;
    }
  }
  if (config.normalize_layers) squared /= summary_length(a.shape(), config.strategy);
  return squared;
}

ReadoutDistance multi_layer_distance(const LayerMaps& x, const LayerMaps& y,
                                     const ReadoutConfig& config) {
  if (config.layers.empty()) throw Error("readout lists no layers");
  ReadoutDistance out;
  double total = 0.0;
  for (const auto& layer : config.layers) {
    const auto ix = x.find(layer);
    const auto iy = y.find(layer);
    if (ix == x.end() || iy == y.end()) {
      throw Error("layer '" + layer + "' is missing from the feature set");
    }
    const double squared = squared_readout_distance(ix->second, iy->second, config, layer);
    if (config.concatenate) {
      total += squared;
    } else {
      out.per_layer.emplace_back(layer, std::sqrt(squared));
    }
  }
  if (config.concatenate) out.concatenated = std::sqrt(total);
  return out;
}

}  // namespace deepiqa

#include "deepiqa/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "deepiqa/error.hpp"
#include "pair_walk.hpp"

namespace deepiqa {

using nlohmann::ordered_json;

ContributionTable ContributionTable::make(std::vector<LayerSpan> spans, std::size_t rows) {
  ContributionTable t;
  std::size_t offset = 0;
  for (auto& span : spans) {
    span.offset = offset;
    offset += span.channels;
  }
  t.spans = std::move(spans);
  t.rows = rows;
  t.cols = offset;
  t.values.assign(rows * offset, 0.0);
  t.mos.assign(rows, 0.0);
  return t;
}

void ContributionTable::validate() const {
  if (values.size() != rows * cols || mos.size() != rows) {
    throw Error("contribution table storage does not match its shape");
  }
  std::size_t offset = 0;
  for (const auto& span : spans) {
    if (span.offset != offset) throw Error("layer spans are not contiguous");
    offset += span.channels;
  }
  if (offset != cols) throw Error("layer spans cover " + std::to_string(offset) + " of " +
                                  std::to_string(cols) + " columns");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw Error("contribution at row " + std::to_string(i / std::max<std::size_t>(cols, 1)) +
                  " is negative or non-finite");
    }
  }
}

ContributionTable build_contribution_table(const FeatureArchive& archive,
                                           std::span<const PairRecord> records,
                                           std::span<const std::string> layers) {
  if (layers.empty()) throw Error("no layers selected for the contribution table");
  for (const auto& r : records) {
    for (const auto* id : {&r.reference_id, &r.distorted_id}) {
      if (!archive.has_image(*id)) {
        throw Error("pair (" + r.reference_id + ", " + r.distorted_id + "): image '" + *id +
                    "' is not in the archive");
      }
    }
  }
  std::vector<LayerSpan> spans;
  for (const auto& layer : layers) {
    const auto* d = archive.manifest().find_layer(layer);
    if (d == nullptr) throw Error("layer '" + layer + "' is not in the archive");
    spans.push_back({layer, 0, d->shape.channels});
  }
  auto table = ContributionTable::make(std::move(spans), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) table.mos[i] = records[i].mos;

  detail::for_each_pair_map(archive, records, layers,
                            [&](std::size_t row, std::size_t l, const FeatureMap& ref,
                                const FeatureMap& dist) {
                              const auto contrib = per_channel_squared_distances(ref, dist);
                              auto out = table.row(row).subspan(table.spans[l].offset,
                                                                table.spans[l].channels);
                              std::copy(contrib.begin(), contrib.end(), out.begin());
                            });
  return table;
}

std::string_view to_string(Surrogate surrogate) {
  return surrogate == Surrogate::pearson_on_distance ? "pearson_on_distance"
                                                     : "pearson_on_log_distance";
}

Surrogate parse_surrogate(std::string_view name) {
  if (name == "pearson_on_distance") return Surrogate::pearson_on_distance;
  if (name == "pearson_on_log_distance") return Surrogate::pearson_on_log_distance;
  throw Error("unknown surrogate '" + std::string(name) + "'");
}

std::vector<double> weighted_distances(const ContributionTable& table,
                                       std::span<const double> flat_weights) {
  if (flat_weights.size() != table.cols) {
    throw Error("weights cover " + std::to_string(flat_weights.size()) + " channels, table has " +
                std::to_string(table.cols));
  }
  std::vector<double> out(table.rows);
  for (std::size_t r = 0; r < table.rows; ++r) out[r] = weighted_distance(table.row(r), flat_weights);
  return out;
}

std::vector<double> flatten_weights(const ChannelWeights& weights,
                                    std::span<const LayerSpan> spans) {
  std::vector<double> flat;
  for (const auto& span : spans) {
    const auto* w = weights.find(span.layer);
    if (w == nullptr) throw Error("weights are missing layer '" + span.layer + "'");
    if (w->size() != span.channels) {
      throw Error("weights for layer '" + span.layer + "' have " + std::to_string(w->size()) +
                  " entries, layer has " + std::to_string(span.channels) + " channels");
    }
    flat.insert(flat.end(), w->begin(), w->end());
  }
  return flat;
}

ChannelWeights unflatten_weights(std::span<const double> flat, std::span<const LayerSpan> spans) {
  ChannelWeights weights;
  for (const auto& span : spans) {
    if (span.offset + span.channels > flat.size()) throw Error("flat weights are too short");
    const auto part = flat.subspan(span.offset, span.channels);
    weights.set(span.layer, {part.begin(), part.end()});
  }
  return weights;
}

double apply_weights(std::span<const double> row, std::span<const LayerSpan> spans,
                     const ChannelWeights& weights) {
  return weighted_distance(row, flatten_weights(weights, spans));
}

double apply_weights(const LayerMaps& x, const LayerMaps& y, std::span<const std::string> layers,
                     const ChannelWeights& weights) {
  ReadoutConfig config;
  config.strategy = Strategy::full;
  config.layers.assign(layers.begin(), layers.end());
  config.concatenate = true;
  config.weights = weights;
  return *multi_layer_distance(x, y, config).concatenated;
}

namespace {

// Pearson correlation between the signed transformed weighted distance and
// the opinion score, with its gradient in the weights.
class SurrogateObjective {
 public:
  SurrogateObjective(const ContributionTable& table, Polarity polarity, Surrogate surrogate)
      : table_(table),
        sign_(polarity == Polarity::higher_is_better ? -1.0 : 1.0),
        surrogate_(surrogate),
        centered_mos_(table.mos) {
    const double mean = std::accumulate(centered_mos_.begin(), centered_mos_.end(), 0.0) /
                        static_cast<double>(centered_mos_.size());
    for (auto& m : centered_mos_) m -= mean;
    mos_ss_ = std::inner_product(centered_mos_.begin(), centered_mos_.end(),
                                 centered_mos_.begin(), 0.0);
  }

  /// Returns NaN when the correlation is undefined (constant distances).
  double value(std::span<const double> w, std::vector<double>* gradient = nullptr) const {
    const std::size_t n = table_.rows;
    std::vector<double> sums(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = table_.row(r);
      sums[r] = std::inner_product(row.begin(), row.end(), w.begin(), 0.0);
    }
    const double mean_sum = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(n);
    // Pairs with (near) zero weighted sum sit at the non-differentiable point
    // of sqrt/log; they are clamped and contribute no gradient.
    const double floor = 1e-12 * mean_sum;
    if (!(floor > 0.0)) return std::nan("");

    std::vector<double> s(n), ds(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double d = std::max(sums[r], floor);
      const bool clamped = sums[r] <= floor;
      if (surrogate_ == Surrogate::pearson_on_distance) {
        s[r] = sign_ * std::sqrt(d);
        ds[r] = clamped ? 0.0 : sign_ * 0.5 / std::sqrt(d);
      } else {
        s[r] = sign_ * 0.5 * std::log(d);
        ds[r] = clamped ? 0.0 : sign_ * 0.5 / d;
      }
    }
    const double mean_s = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      s[r] -= mean_s;
      sab += s[r] * centered_mos_[r];
      saa += s[r] * s[r];
    }
    if (!(saa > 0.0)) return std::nan("");
    const double norm = std::sqrt(saa * mos_ss_);
    const double corr = sab / norm;

    if (gradient != nullptr) {
      gradient->assign(table_.cols, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const double dr_ds = centered_mos_[r] / norm - corr * s[r] / saa;
        const double coeff = dr_ds * ds[r];
        if (coeff == 0.0) continue;
        const auto row = table_.row(r);
        for (std::size_t c = 0; c < table_.cols; ++c) (*gradient)[c] += coeff * row[c];
      }
    }
    return corr;
  }

 private:
  const ContributionTable& table_;
  double sign_;
  Surrogate surrogate_;
  std::vector<double> centered_mos_;
  double mos_ss_ = 0.0;
};

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double training_score(const ContributionTable& table, std::span<const double> w,
                      Polarity polarity) {
  return correlation_score(weighted_distances(table, w), table.mos, polarity);
}

constexpr int kMaxBacktracks = 40;

}  // namespace

FitResult fit_channel_weights(const ContributionTable& table, Polarity polarity,
                              const FitConfig& config) {
  table.validate();
  if (table.rows < 2) throw Error("fitting needs at least two pairs");
  if (table.cols == 0) throw Error("contribution table has no channels");
  if (config.iterations <= 0) throw Error("iterations must be positive");
  if (!(config.step > 0.0) || !std::isfinite(config.step)) {
    throw Error("step size must be finite and positive");
  }
  if (std::all_of(table.mos.begin(), table.mos.end(),
                  [&](double m) { return m == table.mos.front(); })) {
    throw Error("opinion scores are constant; nothing to fit");
  }

  const SurrogateObjective objective(table, polarity, config.surrogate);
  const std::vector<double> ones(table.cols, 1.0);
  std::vector<double> w = ones;
  std::vector<double> gradient;
  double current = objective.value(w, &gradient);
  if (!std::isfinite(current) || !all_finite(gradient)) {
    throw Error("surrogate is not finite at iteration 0 (are all contributions zero?)");
  }

  FitResult result;
  auto& report = result.report;
  report.surrogate_trace.reserve(static_cast<std::size_t>(config.iterations) + 1);
  report.surrogate_trace.push_back(current);

  std::vector<double> candidate(table.cols);
  for (int it = 1; it <= config.iterations; ++it) {
    // Steps are measured in weight units: the largest coordinate moves by t.
    double scale = 0.0;
    for (double g : gradient) scale = std::max(scale, std::abs(g));
    if (!(scale > 0.0)) {
      report.surrogate_trace.push_back(current);
      continue;
    }
    double t = config.step / scale;
    bool accepted = false;
    for (int k = 0; k < kMaxBacktracks && !accepted; ++k, t *= 0.5) {
      for (std::size_t c = 0; c < w.size(); ++c) candidate[c] = std::max(0.0, w[c] + t * gradient[c]);
      // The surrogate is scale-invariant in w; keep the mean weight at 1.
      const double mean = std::accumulate(candidate.begin(), candidate.end(), 0.0) /
                          static_cast<double>(candidate.size());
      if (!(mean > 0.0)) continue;
      for (auto& c : candidate) c /= mean;
      const double value = objective.value(candidate);
      if (std::isfinite(value) && value >= current) {
        accepted = true;
        w = candidate;
        current = objective.value(w, &gradient);
        if (!std::isfinite(current) || !all_finite(gradient)) {
          throw Error("surrogate diverged at iteration " + std::to_string(it));
        }
        ++report.accepted_steps;
      }
    }
    report.surrogate_trace.push_back(current);
  }

  report.initial_score = training_score(table, ones, polarity);
  report.final_score = training_score(table, w, polarity);
  if (report.final_score < report.initial_score) {
    w = ones;
    report.final_score = report.initial_score;
    report.reverted = true;
  }
  result.weights = unflatten_weights(w, table.spans);
  return result;
}

namespace {

ordered_json report_to_json(const FitReport& r) {
  return {{"initial_score", r.initial_score},
          {"final_score", r.final_score},
          {"accepted_steps", r.accepted_steps},
          {"reverted", r.reverted},
          {"surrogate_trace", r.surrogate_trace}};
}

FitReport report_from_json(const ordered_json& j) {
  FitReport r;
  r.initial_score = j.at("initial_score").get<double>();
  r.final_score = j.at("final_score").get<double>();
  r.accepted_steps = j.at("accepted_steps").get<std::size_t>();
  r.reverted = j.at("reverted").get<bool>();
  r.surrogate_trace = j.at("surrogate_trace").get<std::vector<double>>();
  return r;
}

}  // namespace

std::string weights_to_text(const WeightsDocument& doc) {
  ordered_json j;
  j["kind"] = "channel-weights";
  j["training_database"] = doc.training_database;
  j["polarity"] = std::string(to_string(doc.polarity));
  j["concatenate"] = doc.concatenate;
  j["fit_config"] = {{"iterations", doc.config.iterations},
                     {"step", doc.config.step},
                     {"seed", doc.config.seed},
                     {"surrogate", std::string(to_string(doc.config.surrogate))}};
  auto fits = ordered_json::array();
  for (const auto& fit : doc.fits) {
    fits.push_back({{"layers", fit.layers}, {"report", report_to_json(fit.report)}});
  }
  j["fits"] = std::move(fits);
  auto layers = ordered_json::array();
  for (const auto& [name, values] : doc.weights.layers()) {
    layers.push_back({{"name", name}, {"weights", values}});
  }
  j["layers"] = std::move(layers);
  return j.dump(2) + "\n";
}

WeightsDocument weights_from_text(std::string_view text) {
  WeightsDocument doc;
  try {
    const auto j = ordered_json::parse(text);
    if (j.value("kind", std::string{}) != "channel-weights") {
      throw Error("weights file: not a channel-weights document");
    }
    doc.training_database = j.value("training_database", std::string{});
    doc.polarity = parse_polarity(j.value("polarity", std::string{"higher_is_better"}));
    doc.concatenate = j.value("concatenate", false);
    if (j.contains("fit_config")) {
      const auto& c = j["fit_config"];
      doc.config.iterations = c.at("iterations").get<int>();
      doc.config.step = c.at("step").get<double>();
      doc.config.seed = c.at("seed").get<std::uint64_t>();
      doc.config.surrogate = parse_surrogate(c.at("surrogate").get<std::string>());
    }
    for (const auto& fit : j.value("fits", ordered_json::array())) {
      doc.fits.push_back({fit.at("layers").get<std::vector<std::string>>(),
                          report_from_json(fit.at("report"))});
    }
    for (const auto& layer : j.at("layers")) {
      doc.weights.set(layer.at("name").get<std::string>(),
                      layer.at("weights").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("weights file: ") + e.what());
  }
  return doc;
}

void save_weights(const std::filesystem::path& path, const WeightsDocument& doc) {
  std::ofstream out(path, std::ios::trunc);
  out << weights_to_text(doc);
  if (!out) throw Error("cannot write " + path.string());
}

WeightsDocument load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open weights file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return weights_from_text(text.str());
}

}  // namespace deepiqa

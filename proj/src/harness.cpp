#include "deepiqa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "deepiqa/error.hpp"
#include "deepiqa/text.hpp"
#include "pair_walk.hpp"

namespace deepiqa {

using nlohmann::ordered_json;

std::vector<std::string> resolve_layers(const ArchiveManifest& manifest, std::string_view names) {
  std::vector<std::string> layers;
  if (text::trim(names) == "all") {
    for (const auto& layer : manifest.layers) layers.push_back(layer.name);
    return layers;
  }
  for (auto& name : text::split(names, ',')) {
    if (name.empty()) throw Error("empty layer name in '" + std::string(names) + "'");
    if (manifest.find_layer(name) == nullptr) {
      throw Error("layer '" + name + "' is not in the archive");
    }
    layers.push_back(std::move(name));
  }
  return layers;
}

namespace {

void check_weights(const ArchiveManifest& manifest, const ReadoutConfig& config) {
  if (!config.weights) return;
  if (config.strategy == Strategy::gram) {
    throw Error("per-channel weights are not defined for the gram readout");
  }
  for (const auto& layer : config.layers) {
    const auto* w = config.weights->find(layer);
    if (w == nullptr) throw Error("weights do not cover layer '" + layer + "'");
    const auto channels = manifest.find_layer(layer)->shape.channels;
    if (w->size() != channels) {
      throw Error("weights for layer '" + layer + "' have " + std::to_string(w->size()) +
                  " entries, layer has " + std::to_string(channels) + " channels");
    }
  }
}

std::string database_label(std::span<const PairRecord> records) {
  if (records.empty()) return {};
  const auto db = records.front().database;
  const bool same = std::all_of(records.begin(), records.end(),
                                [&](const PairRecord& r) { return r.database == db; });
  return same ? std::string(to_string(db)) : "mixed";
}

}  // namespace

std::vector<std::vector<double>> pair_distances(const FeatureArchive& archive,
                                                std::span<const PairRecord> records,
                                                const ReadoutConfig& config) {
  if (config.layers.empty()) throw Error("readout lists no layers");
  detail::require_coverage(archive, records, config.layers);
  check_weights(archive.manifest(), config);

  std::vector<std::vector<double>> squared(config.layers.size(),
                                           std::vector<double>(records.size(), 0.0));
  detail::for_each_pair_map(
      archive, records, config.layers,
      [&](std::size_t row, std::size_t l, const FeatureMap& ref, const FeatureMap& dist) {
        squared[l][row] = squared_readout_distance(ref, dist, config, config.layers[l]);
      });

  if (config.concatenate) {
    std::vector<double> total(records.size(), 0.0);
    for (const auto& layer : squared) {
      for (std::size_t p = 0; p < total.size(); ++p) total[p] += layer[p];
    }
    for (auto& t : total) t = std::sqrt(t);
    return {std::move(total)};
  }
  for (auto& layer : squared) {
    for (auto& v : layer) v = std::sqrt(v);
  }
  return squared;
}

CorrelationReport evaluate_layerwise(const FeatureArchive& archive,
                                     std::span<const PairRecord> records,
                                     const ReadoutConfig& config, Polarity polarity) {
  if (records.size() < 2) throw Error("evaluation needs at least two pairs");
  const auto& manifest = archive.manifest();
  for (const auto& layer : config.layers) {
    if (manifest.find_layer(layer) == nullptr) {
      throw Error("layer '" + layer + "' is not in the archive");
    }
  }
  const auto distances = pair_distances(archive, records, config);

  std::vector<double> mos(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) mos[i] = records[i].mos;

  const double max_index = static_cast<double>(manifest.max_layer_index());
  const auto depth = [&](std::size_t index) {
    return max_index > 0.0 ? static_cast<double>(index) / max_index : 0.0;
  };
  const auto make_row = [&](std::string name, std::size_t index, const std::vector<double>& d) {
    ReportRow row;
    row.layer_name = std::move(name);
    row.layer_index = index;
    row.depth_fraction = depth(index);
    try {
      row.spearman = spearman(d, mos);
    } catch (const Error& e) {
      throw Error("layer '" + row.layer_name + "': " + e.what());
    }
    row.score = polarity == Polarity::higher_is_better ? -row.spearman : row.spearman;
    row.n_pairs = records.size();
    return row;
  };

  CorrelationReport report;
  report.model_id = manifest.model_id;
  report.database = database_label(records);
  report.readout = config.summary();
  report.polarity = polarity;
  if (config.concatenate) {
    std::size_t index = 0;
    for (const auto& layer : config.layers) {
      index = std::max(index, manifest.find_layer(layer)->index);
    }
    report.rows.push_back(make_row("concat", index, distances.front()));
  } else {
    for (std::size_t l = 0; l < config.layers.size(); ++l) {
      report.rows.push_back(make_row(config.layers[l],
                                     manifest.find_layer(config.layers[l])->index, distances[l]));
    }
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const ReportRow& a, const ReportRow& b) {
                       return a.layer_index < b.layer_index;
                     });
  }
  return report;
}

std::vector<ScatterRow> accuracy_correlation_table(std::span<const ModelRegistryEntry> registry,
                                                   std::span<const CorrelationReport> reports) {
  std::vector<ScatterRow> out;
  for (const auto& entry : registry) {
    std::map<std::string, ScatterRow> by_database;
    for (const auto& report : reports) {
      if (report.model_id != entry.model_id) continue;
      for (const auto& row : report.rows) {
        auto [it, inserted] = by_database.try_emplace(report.database);
        auto& s = it->second;
        if (inserted || row.score > s.max_score) {
          s = ScatterRow{entry.model_id,   entry.architecture, entry.training_process,
                         entry.supervised(), entry.imagenet_top1, report.database,
                         row.score,        row.layer_name,     row.depth_fraction};
        }
      }
    }
    if (by_database.empty()) {
      throw Error("model '" + entry.model_id + "' has no report");
    }
    for (auto& [db, row] : by_database) out.push_back(std::move(row));
  }
  return out;
}

void write_scatter_csv(std::ostream& out, std::span<const ScatterRow> rows) {
  out << "model_id,architecture,training_process,supervision,imagenet_top1,database,max_score,"
         "best_layer,best_depth_fraction\n";
  for (const auto& r : rows) {
    out << r.model_id << ',' << r.architecture << ',' << r.training_process << ','
        << (r.supervised ? "supervised" : "self-supervised") << ','
        << text::format_double(r.imagenet_top1) << ',' << r.database << ','
        << text::format_double(r.max_score) << ',' << r.best_layer << ','
        << text::format_double(r.best_depth_fraction) << '\n';
  }
}

namespace {
constexpr std::string_view kReportHeader =
    "layer_name,layer_index,depth_fraction,spearman,score,n_pairs";
}

void emit_report(const CorrelationReport& report, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::csv) {
    out << kReportHeader << '\n';
    for (const auto& r : report.rows) {
      out << r.layer_name << ',' << r.layer_index << ',' << text::format_double(r.depth_fraction)
          << ',' << text::format_double(r.spearman) << ',' << text::format_double(r.score) << ','
          << r.n_pairs << '\n';
    }
    return;
  }
  ordered_json j;
  j["model_id"] = report.model_id;
  j["database"] = report.database;
  j["readout"] = report.readout;
  j["polarity"] = std::string(to_string(report.polarity));
  j["split"] = report.split;
  auto baselines = ordered_json::array();
  for (const auto& b : report.baselines) {
    baselines.push_back({{"name", b.name}, {"database", b.database}, {"score", b.score}});
  }
  j["baselines"] = std::move(baselines);
  auto rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"layer_name", r.layer_name},
                    {"layer_index", r.layer_index},
                    {"depth_fraction", r.depth_fraction},
                    {"spearman", r.spearman},
                    {"score", r.score},
                    {"n_pairs", r.n_pairs}});
  }
  j["rows"] = std::move(rows);
  out << j.dump(2) << '\n';
}

void emit_report(const CorrelationReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write report " + path.string());
  emit_report(report, format, out);
  if (!out) throw Error("cannot write report " + path.string());
}

CorrelationReport parse_report_csv(std::istream& in) {
  CorrelationReport report;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    if (!have_header) {
      if (text::trim(line) != kReportHeader) {
        throw Error("report header must be '" + std::string(kReportHeader) + "'");
      }
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 6) {
      throw Error("report line " + std::to_string(line_number) + ": expected 6 columns");
    }
    try {
      report.rows.push_back({f[0], static_cast<std::size_t>(text::parse_integer(f[1])),
                             text::parse_double(f[2]), text::parse_double(f[3]),
                             text::parse_double(f[4]),
                             static_cast<std::size_t>(text::parse_integer(f[5]))});
    } catch (const Error& e) {
      throw Error("report line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  if (!have_header) throw Error("report is empty");
  return report;
}

CorrelationReport parse_report_structured(std::istream& in) {
  CorrelationReport report;
  try {
    const auto j = ordered_json::parse(in);
    report.model_id = j.at("model_id").get<std::string>();
    report.database = j.at("database").get<std::string>();
    report.readout = j.value("readout", std::string{});
    report.polarity = parse_polarity(j.value("polarity", std::string{"higher_is_better"}));
    report.split = j.value("split", std::string{});
    for (const auto& b : j.value("baselines", ordered_json::array())) {
      report.baselines.push_back({b.at("name").get<std::string>(),
                                  b.at("database").get<std::string>(),
                                  b.at("score").get<double>()});
    }
    for (const auto& r : j.at("rows")) {
      report.rows.push_back({r.at("layer_name").get<std::string>(),
                             r.at("layer_index").get<std::size_t>(),
                             r.at("depth_fraction").get<double>(), r.at("spearman").get<double>(),
                             r.at("score").get<double>(), r.at("n_pairs").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("report: ") + e.what());
  }
  return report;
}

CorrelationReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report " + path.string());
  try {
    if (path.extension() == ".json") return parse_report_structured(in);
    auto report = parse_report_csv(in);
    report.model_id = path.stem().string();
    return report;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<Baseline> read_baselines_csv(std::istream& in) {
  std::vector<Baseline> out;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    if (!have_header) {
      if (text::trim(line) != "name,database,score") {
        throw Error("baselines header must be 'name,database,score'");
      }
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 3) {
      throw Error("baselines line " + std::to_string(line_number) + ": expected 3 columns");
    }
    out.push_back({f[0], f[1], text::parse_double(f[2])});
  }
  return out;
}

}  // namespace deepiqa

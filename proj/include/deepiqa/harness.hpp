#pragma once

// Layer-wise correlation experiments and their plot-ready reports.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deepiqa/archive.hpp"
#include "deepiqa/dataset.hpp"
#include "deepiqa/distance.hpp"
#include "deepiqa/rank_stats.hpp"
#include "deepiqa/registry.hpp"

namespace deepiqa {

struct ReportRow {
  std::string layer_name;
  std::size_t layer_index = 0;
  double depth_fraction = 0.0;
  double spearman = 0.0;
  double score = 0.0;
  std::size_t n_pairs = 0;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Externally published score drawn as a reference line (SSIM, LPIPS, ...).
struct Baseline {
  std::string name;
  std::string database;
  double score = 0.0;
  friend bool operator==(const Baseline&, const Baseline&) = default;
};

struct CorrelationReport {
  std::string model_id;
  std::string database;
  std::string readout;
  Polarity polarity = Polarity::higher_is_better;
  std::string split;  // free-form split provenance, e.g. "seed=2013;by_pair"
  std::vector<Baseline> baselines;
  std::vector<ReportRow> rows;
  friend bool operator==(const CorrelationReport&, const CorrelationReport&) = default;
};

/// Layers named by the readout, or every archive layer when `names` is "all".
std::vector<std::string> resolve_layers(const ArchiveManifest& manifest, std::string_view names);

/// Distances for every pair at every configured layer, then one correlation
/// per layer (or one "concat" row). Depth fractions are layer index over the
/// largest index recorded in the archive.
CorrelationReport evaluate_layerwise(const FeatureArchive& archive,
                                     std::span<const PairRecord> records,
                                     const ReadoutConfig& config, Polarity polarity);

/// Per-pair distances at one configured layer, or the concatenation.
/// Row p of the result belongs to records[p].
std::vector<std::vector<double>> pair_distances(const FeatureArchive& archive,
                                                std::span<const PairRecord> records,
                                                const ReadoutConfig& config);

struct ScatterRow {
  std::string model_id;
  std::string architecture;
  std::string training_process;
  bool supervised = false;
  double imagenet_top1 = 0.0;
  std::string database;
  double max_score = 0.0;
  std::string best_layer;
  double best_depth_fraction = 0.0;
};

/// One row per (registry model, database) with the best layer score over all
/// of that model's reports on the database.
std::vector<ScatterRow> accuracy_correlation_table(std::span<const ModelRegistryEntry> registry,
                                                   std::span<const CorrelationReport> reports);
void write_scatter_csv(std::ostream& out, std::span<const ScatterRow> rows);

enum class ReportFormat { csv, structured };

/// csv: header plus one line per row with exactly the ReportRow columns.
/// structured: JSON carrying the metadata as well.
void emit_report(const CorrelationReport& report, ReportFormat format, std::ostream& out);
void emit_report(const CorrelationReport& report, ReportFormat format,
                 const std::filesystem::path& path);

/// Parses csv rows; metadata fields stay empty.
CorrelationReport parse_report_csv(std::istream& in);
CorrelationReport parse_report_structured(std::istream& in);

/// Picks the parser from the extension: .json is structured, anything else csv.
/// A csv report takes its model id from the file stem.
CorrelationReport load_report(const std::filesystem::path& path);

std::vector<Baseline> read_baselines_csv(std::istream& in);

}  // namespace deepiqa

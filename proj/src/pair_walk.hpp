#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deepiqa/archive.hpp"
#include "deepiqa/dataset.hpp"
#include "deepiqa/error.hpp"
#include "deepiqa/parallel.hpp"

namespace deepiqa::detail {

/// "(image, layer)" entries the records need but the archive lacks.
inline std::vector<std::string> missing_coverage(const FeatureArchive& archive,
                                                 std::span<const PairRecord> records,
                                                 std::span<const std::string> layers) {
  std::vector<std::string> missing;
  std::vector<std::string> missing_layers;
  for (const auto& layer : layers) {
    if (archive.manifest().find_layer(layer) == nullptr) missing_layers.push_back(layer);
  }
  for (const auto& id : pair_manifest(records)) {
    const bool present = archive.has_image(id);
    for (const auto& layer : layers) {
      const bool layer_missing =
          std::find(missing_layers.begin(), missing_layers.end(), layer) != missing_layers.end();
      if (!present || layer_missing) missing.push_back("(" + id + ", " + layer + ")");
    }
  }
  return missing;
}

inline void require_coverage(const FeatureArchive& archive, std::span<const PairRecord> records,
                             std::span<const std::string> layers) {
  const auto missing = missing_coverage(archive, records, layers);
  if (missing.empty()) return;
  std::string message = "archive lacks " + std::to_string(missing.size()) + " (image, layer) entries:";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) message += " " + missing[i];
  if (shown < missing.size()) message += " ...";
  throw Error(message);
}

/// Calls visit(row, layer_position, reference_map, distorted_map) for every
/// record and layer. Records sharing a reference are visited together so the
/// reference payload is read once per layer. Groups run in parallel; each row
/// is visited by exactly one thread.
template <typename Visit>
void for_each_pair_map(const FeatureArchive& archive, std::span<const PairRecord> records,
                       std::span<const std::string> layers, Visit&& visit) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].reference_id].push_back(i);
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> order;
  order.reserve(groups.size());
  for (const auto& g : groups) order.push_back(&g);

  parallel_for(order.size(), [&](std::size_t g) {
    const auto& [reference, rows] = *order[g];
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto ref_map = archive.load(reference, layers[l]);
      for (const auto row : rows) {
        const auto dist_map = archive.load(records[row].distorted_id, layers[l]);
        visit(row, l, ref_map, dist_map);
      }
    }
  });
}

}  // namespace deepiqa::detail

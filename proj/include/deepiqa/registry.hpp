#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace deepiqa {

struct ModelRegistryEntry {
  std::string model_id;
  std::string architecture;
  std::string training_process;  // "supervised" or "self-supervised <task>"
  std::string training_data;
  double imagenet_top1 = 0.0;  // percent

  bool supervised() const { return training_process == "supervised"; }
  friend bool operator==(const ModelRegistryEntry&, const ModelRegistryEntry&) = default;
};

/// ImageNet-1K models with their published top-1 accuracies.
const std::vector<ModelRegistryEntry>& default_registry();

/// Capture points for an architecture, input first. Reconstructed from the
/// public model definitions; empty for architectures without a default.
std::vector<std::string> default_layers(std::string_view architecture);

/// CSV with header model_id,architecture,training_process,training_data,imagenet_top1
std::vector<ModelRegistryEntry> read_registry_csv(std::istream& in);
void write_registry_csv(std::ostream& out, const std::vector<ModelRegistryEntry>& entries);
std::vector<ModelRegistryEntry> load_registry_csv(const std::filesystem::path& path);

}  // namespace deepiqa

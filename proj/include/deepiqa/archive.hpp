#pragma once

// On-disk feature archive: one JSON manifest at the root plus one raw payload
// per (image, layer) at <image_id>/<layer_name>.bin, little-endian float32,
// row-major (H, W, C).

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace deepiqa {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t spatial() const { return height * width; }
  std::size_t elements() const { return height * width * channels; }
  std::string to_string() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// One layer's activations for one image. Values are finite and stored
/// row-major in (H, W, C) order; both are checked on construction.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::span<const float> values() const { return values_; }

  float at(std::size_t h, std::size_t w, std::size_t c) const {
    return values_[(h * shape_.width + w) * shape_.channels + c];
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  Shape shape_{};
  std::vector<float> values_;
};

struct LayerDescriptor {
  std::string name;
  std::size_t index = 0;  // topological position, 0 = input
  Shape shape;
  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct ImageEntry {
  std::string image_id;
  std::string source_file;
  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

inline constexpr std::string_view kInputLayer = "input";
inline constexpr std::string_view kDtypeTag = "f32-le";
inline constexpr std::string_view kLayoutTag = "hwc";
inline constexpr std::string_view kManifestFile = "manifest.json";

struct ArchiveManifest {
  std::string model_id;
  std::string preprocessing_note;
  std::vector<LayerDescriptor> layers;
  std::vector<ImageEntry> images;
  std::string dtype{kDtypeTag};
  std::string layout{kLayoutTag};

  const LayerDescriptor* find_layer(std::string_view name) const;
  std::size_t max_layer_index() const;
  friend bool operator==(const ArchiveManifest&, const ArchiveManifest&) = default;
};

/// Every invariant violation in the manifest, in a stable order. Empty means valid.
std::vector<std::string> validate_manifest(const ArchiveManifest& manifest);

std::string manifest_to_text(const ArchiveManifest& manifest);
ArchiveManifest manifest_from_text(std::string_view text);

using TensorKey = std::pair<std::string, std::string>;  // (image_id, layer)
using TensorMap = std::map<TensorKey, FeatureMap>;

/// Writes a complete archive. Fails if the manifest is invalid, a tensor is
/// missing, unlisted or mis-shaped, or root already holds a manifest.
void write_archive(const std::filesystem::path& root, const ArchiveManifest& manifest,
                   const TensorMap& tensors);

/// Read-only handle on an archive. Payloads are read on demand, one file per
/// call to load(); the handle holds only the manifest in memory.
class FeatureArchive {
 public:
  using AccessObserver = std::function<void(const std::filesystem::path&)>;

  FeatureArchive(std::filesystem::path root, ArchiveManifest manifest);

  const ArchiveManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }

  bool has_image(std::string_view image_id) const;
  std::filesystem::path payload_path(std::string_view image_id, std::string_view layer) const;

  FeatureMap load(std::string_view image_id, std::string_view layer) const;

  /// Checks presence, byte length and finiteness of every payload.
  /// Reads every file; returns one message per problem.
  std::vector<std::string> verify_payloads() const;

  /// Invoked with the payload path each time load() reads a file. Not
  /// synchronized; the observer must be thread-safe if loads are concurrent.
  void set_access_observer(AccessObserver observer) { observer_ = std::move(observer); }

 private:
  std::filesystem::path root_;
  ArchiveManifest manifest_;
  std::unordered_map<std::string, std::size_t> image_rows_;
  AccessObserver observer_;
};

/// Opens an archive: parses and validates the manifest, touches no payload.
FeatureArchive read_archive(const std::filesystem::path& root);

}  // namespace deepiqa

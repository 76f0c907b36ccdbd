#include "deepiqa/archive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deepiqa/error.hpp"

namespace deepiqa {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '(' << height << ',' << width << ',' << channels << ')';
  return os.str();
}

FeatureMap::FeatureMap(Shape shape, std::vector<float> values)
    : shape_(shape), values_(std::move(values)) {
  if (shape_.height == 0 || shape_.width == 0 || shape_.channels == 0) {
    throw Error("feature map shape " + shape_.to_string() + " has a zero dimension");
  }
  if (values_.size() != shape_.elements()) {
    throw Error("feature map shape " + shape_.to_string() + " needs " +
                std::to_string(shape_.elements()) + " values, got " +
                std::to_string(values_.size()));
  }
  const auto bad = std::find_if(values_.begin(), values_.end(),
                                [](float v) { return !std::isfinite(v); });
  if (bad != values_.end()) {
    throw Error("feature map holds a non-finite value at element " +
                std::to_string(bad - values_.begin()));
  }
}

const LayerDescriptor* ArchiveManifest::find_layer(std::string_view name) const {
  for (const auto& layer : layers) {
    if (layer.name == name) return &layer;
  }
  return nullptr;
}

std::size_t ArchiveManifest::max_layer_index() const {
  std::size_t m = 0;
  for (const auto& layer : layers) m = std::max(m, layer.index);
  return m;
}

namespace {

// Names become path components, so separators and dot entries are refused.
bool is_path_safe(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  return name.find('/') == std::string_view::npos && name.find('\\') == std::string_view::npos &&
         name.find('\0') == std::string_view::npos;
}

}  // namespace

std::vector<std::string> validate_manifest(const ArchiveManifest& manifest) {
  std::vector<std::string> out;
  if (manifest.dtype != kDtypeTag) {
    out.push_back("dtype tag '" + manifest.dtype + "' is not '" + std::string(kDtypeTag) + "'");
  }
  if (manifest.layout != kLayoutTag) {
    out.push_back("layout tag '" + manifest.layout + "' is not '" + std::string(kLayoutTag) + "'");
  }

  const auto* input = manifest.find_layer(kInputLayer);
  if (input == nullptr) {
    out.push_back("layer 'input' is missing");
  } else if (input->index != 0) {
    out.push_back("layer 'input' has index " + std::to_string(input->index) + ", expected 0");
  }

  std::set<std::string> layer_names;
  for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
    const auto& layer = manifest.layers[i];
    if (!is_path_safe(layer.name)) {
      out.push_back("layer name '" + layer.name + "' is empty or contains a path separator");
    }
    if (!layer_names.insert(layer.name).second) {
      out.push_back("duplicate layer name '" + layer.name + "'");
    }
    if (layer.shape.height == 0 || layer.shape.width == 0 || layer.shape.channels == 0) {
      out.push_back("layer '" + layer.name + "' has degenerate shape " + layer.shape.to_string());
    }
    if (i > 0) {
      const auto prev = manifest.layers[i - 1].index;
      if (layer.index == prev) {
        out.push_back("duplicate layer index " + std::to_string(layer.index) + " at layer '" +
                      layer.name + "'");
      } else if (layer.index < prev) {
        out.push_back("layer index " + std::to_string(layer.index) + " at layer '" + layer.name +
                      "' is not increasing");
      }
    }
  }

  std::set<std::string> image_ids;
  for (const auto& image : manifest.images) {
    if (!is_path_safe(image.image_id)) {
      out.push_back("image id '" + image.image_id + "' is empty or contains a path separator");
    }
    if (!image_ids.insert(image.image_id).second) {
      out.push_back("duplicate image id '" + image.image_id + "'");
    }
  }
  return out;
}

std::string manifest_to_text(const ArchiveManifest& manifest) {
  ordered_json doc;
  doc["model_id"] = manifest.model_id;
  doc["preprocessing_note"] = manifest.preprocessing_note;
  doc["dtype"] = manifest.dtype;
  doc["layout"] = manifest.layout;
  auto layers = ordered_json::array();
  for (const auto& layer : manifest.layers) {
    layers.push_back({{"name", layer.name},
                      {"index", layer.index},
                      {"shape", {layer.shape.height, layer.shape.width, layer.shape.channels}}});
  }
  doc["layers"] = std::move(layers);
  auto images = ordered_json::array();
  for (const auto& image : manifest.images) {
    images.push_back({{"image_id", image.image_id}, {"source_file", image.source_file}});
  }
  doc["images"] = std::move(images);
  return doc.dump(2) + "\n";
}

ArchiveManifest manifest_from_text(std::string_view text) {
  ArchiveManifest manifest;
  try {
    const auto doc = ordered_json::parse(text);
    manifest.model_id = doc.at("model_id").get<std::string>();
    manifest.preprocessing_note = doc.value("preprocessing_note", std::string{});
    manifest.dtype = doc.at("dtype").get<std::string>();
    manifest.layout = doc.at("layout").get<std::string>();
    for (const auto& layer : doc.at("layers")) {
      const auto& shape = layer.at("shape");
      if (!shape.is_array() || shape.size() != 3) {
        throw Error("manifest: layer shape must be [H, W, C]");
      }
      manifest.layers.push_back(
          {layer.at("name").get<std::string>(), layer.at("index").get<std::size_t>(),
           Shape{shape[0].get<std::size_t>(), shape[1].get<std::size_t>(),
                 shape[2].get<std::size_t>()}});
    }
    for (const auto& image : doc.at("images")) {
      manifest.images.push_back(
          {image.at("image_id").get<std::string>(), image.value("source_file", std::string{})});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("manifest: ") + e.what());
  }
  return manifest;
}

namespace {

void encode_f32_le(std::span<const float> values, std::vector<char>& bytes) {
  bytes.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<char>(bits & 0xFFu);
    bytes[4 * i + 1] = static_cast<char>((bits >> 8) & 0xFFu);
    bytes[4 * i + 2] = static_cast<char>((bits >> 16) & 0xFFu);
    bytes[4 * i + 3] = static_cast<char>((bits >> 24) & 0xFFu);
  }
}

std::vector<float> decode_f32_le(std::span<const char> bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto b = [&](std::size_t k) {
      return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + k]));
    };
    values[i] = std::bit_cast<float>(b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24));
  }
  return values;
}

std::string describe(std::string_view image_id, std::string_view layer) {
  return "(image '" + std::string(image_id) + "', layer '" + std::string(layer) + "')";
}

void write_file(const fs::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

void write_archive(const fs::path& root, const ArchiveManifest& manifest,
                   const TensorMap& tensors) {
  if (const auto violations = validate_manifest(manifest); !violations.empty()) {
    throw Error("invalid manifest: " + violations.front());
  }
  for (const auto& image : manifest.images) {
    for (const auto& layer : manifest.layers) {
      const auto it = tensors.find({image.image_id, layer.name});
      if (it == tensors.end()) {
        throw Error("no tensor for " + describe(image.image_id, layer.name));
      }
      if (it->second.shape() != layer.shape) {
        throw Error("shape mismatch for " + describe(image.image_id, layer.name) + ": tensor " +
                    it->second.shape().to_string() + ", manifest " + layer.shape.to_string());
      }
    }
  }
  std::set<std::string> ids;
  for (const auto& image : manifest.images) ids.insert(image.image_id);
  for (const auto& [key, map] : tensors) {
    if (!ids.contains(key.first) || manifest.find_layer(key.second) == nullptr) {
      throw Error("tensor for unlisted " + describe(key.first, key.second));
    }
  }

  if (fs::exists(root / kManifestFile)) {
    throw Error("archive already exists at " + root.string());
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error("cannot create " + root.string() + ": " + ec.message());

  std::vector<char> bytes;
  for (const auto& image : manifest.images) {
    fs::create_directories(root / image.image_id, ec);
    if (ec) throw Error("cannot create directory for image '" + image.image_id + "'");
    for (const auto& layer : manifest.layers) {
      encode_f32_le(tensors.at({image.image_id, layer.name}).values(), bytes);
      write_file(root / image.image_id / (layer.name + ".bin"), bytes);
    }
  }
  // Manifest last: its presence marks a complete archive.
  const auto text = manifest_to_text(manifest);
  write_file(root / kManifestFile, text);
}

FeatureArchive::FeatureArchive(fs::path root, ArchiveManifest manifest)
    : root_(std::move(root)), manifest_(std::move(manifest)) {
  if (const auto violations = validate_manifest(manifest_); !violations.empty()) {
    throw Error("invalid manifest in " + root_.string() + ": " + violations.front());
  }
  for (std::size_t i = 0; i < manifest_.images.size(); ++i) {
    image_rows_.emplace(manifest_.images[i].image_id, i);
  }
}

bool FeatureArchive::has_image(std::string_view image_id) const {
  return image_rows_.contains(std::string(image_id));
}

fs::path FeatureArchive::payload_path(std::string_view image_id, std::string_view layer) const {
  return root_ / std::string(image_id) / (std::string(layer) + ".bin");
}

FeatureMap FeatureArchive::load(std::string_view image_id, std::string_view layer) const {
  if (!has_image(image_id)) {
    throw Error("image '" + std::string(image_id) + "' is not in the archive");
  }
  const auto* descriptor = manifest_.find_layer(layer);
  if (descriptor == nullptr) {
    throw Error("layer '" + std::string(layer) + "' is not in the archive");
  }
  const auto path = payload_path(image_id, layer);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("missing payload file for " + describe(image_id, layer));
  }
  if (observer_) observer_(path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expected = descriptor->shape.elements() * 4;
  if (bytes.size() != expected) {
    throw Error("payload for " + describe(image_id, layer) + " has " +
                std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));
  }
  try {
    return FeatureMap(descriptor->shape, decode_f32_le(bytes));
  } catch (const Error& e) {
    throw Error("payload for " + describe(image_id, layer) + ": " + e.what());
  }
}

std::vector<std::string> FeatureArchive::verify_payloads() const {
  std::vector<std::string> problems;
  for (const auto& image : manifest_.images) {
    for (const auto& layer : manifest_.layers) {
      try {
        (void)load(image.image_id, layer.name);
      } catch (const Error& e) {
        problems.emplace_back(e.what());
      }
    }
  }
  return problems;
}

FeatureArchive read_archive(const fs::path& root) {
  std::ifstream in(root / kManifestFile);
  if (!in) {
    throw Error("manifest missing in " + root.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return FeatureArchive(root, manifest_from_text(text.str()));
}

}  // namespace deepiqa

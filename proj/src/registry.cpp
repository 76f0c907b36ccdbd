#include "deepiqa/registry.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "deepiqa/error.hpp"
#include "deepiqa/text.hpp"

namespace deepiqa {

const std::vector<ModelRegistryEntry>& default_registry() {
  static const std::vector<ModelRegistryEntry> registry = {
      {"alexnet-imagenet-supervised", "alexnet", "supervised", "imagenet-1k", 56.5},
      {"vgg16-imagenet-supervised", "vgg16", "supervised", "imagenet-1k", 71.3},
      {"densenet121-imagenet-supervised", "densenet121", "supervised", "imagenet-1k", 75.0},
      {"resnet50-imagenet-supervised", "resnet50", "supervised", "imagenet-1k", 74.9},
      {"efficientnetb0-imagenet-supervised", "efficientnetb0", "supervised", "imagenet-1k", 77.7},
      {"alexnet-imagenet-rotnet", "alexnet", "self-supervised rotnet", "imagenet-1k", 39.5},
      {"alexnet-imagenet-jigsaw", "alexnet", "self-supervised jigsaw", "imagenet-1k", 34.8},
      {"alexnet-imagenet-colorization", "alexnet", "self-supervised colorization", "imagenet-1k",
       30.4},
      {"alexnet-imagenet-deepcluster", "alexnet", "self-supervised deepcluster", "imagenet-1k",
       37.9},
  };
  return registry;
}

std::vector<std::string> default_layers(std::string_view architecture) {
  // torchvision AlexNet `features` stages, post-ReLU, plus the three max pools.
  if (architecture == "alexnet") {
    return {"input", "conv1", "pool1", "conv2", "pool2", "conv3", "conv4", "conv5", "pool5"};
  }
  // Keras VGG16 layer names.
  if (architecture == "vgg16") {
    return {"input",        "block1_conv1", "block1_conv2", "block1_pool",  "block2_conv1",
            "block2_conv2", "block2_pool",  "block3_conv1", "block3_conv2", "block3_conv3",
            "block3_pool",  "block4_conv1", "block4_conv2", "block4_conv3", "block4_pool",
            "block5_conv1", "block5_conv2", "block5_conv3", "block5_pool"};
  }
  return {};
}

namespace {
constexpr std::string_view kRegistryHeader =
    "model_id,architecture,training_process,training_data,imagenet_top1";
}

std::vector<ModelRegistryEntry> read_registry_csv(std::istream& in) {
  std::vector<ModelRegistryEntry> entries;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    if (!have_header) {
      if (text::trim(line) != kRegistryHeader) {
        throw Error("registry header must be '" + std::string(kRegistryHeader) + "'");
      }
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    const auto where = "registry line " + std::to_string(line_number) + ": ";
    if (f.size() != 5) throw Error(where + "expected 5 columns");
    ModelRegistryEntry e{f[0], f[1], f[2], f[3], 0.0};
    try {
      e.imagenet_top1 = text::parse_double(f[4]);
    } catch (const Error& err) {
      throw Error(where + err.what());
    }
    if (e.model_id.empty()) throw Error(where + "empty model_id");
    if (!(e.imagenet_top1 >= 0.0 && e.imagenet_top1 <= 100.0)) {
      throw Error(where + "top-1 accuracy outside [0, 100]");
    }
    if (!ids.insert(e.model_id).second) throw Error(where + "duplicate model '" + e.model_id + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_registry_csv(std::ostream& out, const std::vector<ModelRegistryEntry>& entries) {
  out << kRegistryHeader << '\n';
  for (const auto& e : entries) {
    out << e.model_id << ',' << e.architecture << ',' << e.training_process << ','
        << e.training_data << ',' << text::format_double(e.imagenet_top1) << '\n';
  }
}

std::vector<ModelRegistryEntry> load_registry_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open registry " + path.string());
  return read_registry_csv(in);
}

}  // namespace deepiqa

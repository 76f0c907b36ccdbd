// deepiqa: feature-space image quality experiments from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepiqa/archive.hpp"
#include "deepiqa/dataset.hpp"
#include "deepiqa/distance.hpp"
#include "deepiqa/error.hpp"
#include "deepiqa/finetune.hpp"
#include "deepiqa/harness.hpp"
#include "deepiqa/registry.hpp"
#include "deepiqa/text.hpp"

namespace fs = std::filesystem;
using namespace deepiqa;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct EvaluateArgs {
  std::string features, pairs, readout = "full", layers = "all", weights, polarity = "higher_is_better";
  std::string out, format, baselines, split_info;
  bool concat = false, gram_unnormalized = false, normalize_layers = false;
};

struct FinetuneArgs {
  std::string features, pairs, layers, out, polarity = "higher_is_better";
  std::string surrogate = "pearson_on_distance", database;
  bool concat = false;
  int iterations = 200;
  double step = 1.0;
  std::uint64_t seed = 2013;
};

struct SplitArgs {
  std::string pairs, granularity = "by_pair", out_train, out_val;
  double fraction = 0.7;
  std::uint64_t seed = kDefaultSplitSeed;
};

struct ScatterArgs {
  std::string registry, out;
  std::vector<std::string> reports;
};

struct IngestArgs {
  std::string format, in, out, images_out;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto archive = read_archive(a.features);
  const auto records = load_pairs_csv(a.pairs);

  ReadoutConfig config;
  config.strategy = parse_strategy(a.readout);
  config.layers = resolve_layers(archive.manifest(), a.layers);
  config.concatenate = a.concat;
  if (a.gram_unnormalized) config.gram_normalization = GramNormalization::none;
  config.normalize_layers = a.normalize_layers;
  if (!a.weights.empty()) config.weights = load_weights(a.weights).weights;

  auto report = evaluate_layerwise(archive, records, config, parse_polarity(a.polarity));
  report.split = a.split_info;
  if (!a.baselines.empty()) {
    std::ifstream in(a.baselines);
    if (!in) throw Error("cannot open baselines " + a.baselines);
    for (auto& b : read_baselines_csv(in)) {
      if (b.database == report.database) report.baselines.push_back(std::move(b));
    }
  }

  auto format = fs::path(a.out).extension() == ".json" ? ReportFormat::structured
                                                       : ReportFormat::csv;
  if (a.format == "csv") format = ReportFormat::csv;
  if (a.format == "json") format = ReportFormat::structured;
  emit_report(report, format, fs::path(a.out));

  for (const auto& row : report.rows) {
    std::cout << row.layer_name << "\tdepth=" << text::format_double(row.depth_fraction)
              << "\tscore=" << text::format_double(row.score) << '\n';
  }
  std::cout << "wrote " << a.out << " (" << report.rows.size() << " rows, "
            << records.size() << " pairs)\n";
  return 0;
}

int run_finetune(const FinetuneArgs& a) {
  const auto archive = read_archive(a.features);
  const auto records = load_pairs_csv(a.pairs);
  const auto layers = resolve_layers(archive.manifest(), a.layers);
  const auto polarity = parse_polarity(a.polarity);

  FitConfig config;
  config.iterations = a.iterations;
  config.step = a.step;
  config.seed = a.seed;
  config.surrogate = parse_surrogate(a.surrogate);

  WeightsDocument doc;
  doc.polarity = polarity;
  doc.config = config;
  doc.concatenate = a.concat;
  doc.training_database = a.database;
  if (doc.training_database.empty() && !records.empty()) {
    doc.training_database = std::string(to_string(records.front().database));
  }

  const auto fit_group = [&](const std::vector<std::string>& group) {
    const auto table = build_contribution_table(archive, records, group);
    auto result = fit_channel_weights(table, polarity, config);
    for (const auto& [name, values] : result.weights.layers()) doc.weights.set(name, values);
    std::cout << text::join(group, "+") << "\ttrain score "
              << text::format_double(result.report.initial_score) << " -> "
              << text::format_double(result.report.final_score)
              << (result.report.reverted ? " (kept all-ones)" : "") << '\n';
    doc.fits.push_back({group, std::move(result.report)});
  };
  if (a.concat) {
    fit_group(layers);
  } else {
    for (const auto& layer : layers) fit_group({layer});
  }
  save_weights(a.out, doc);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

int run_split(const SplitArgs& a) {
  const auto records = load_pairs_csv(a.pairs);
  SplitSpec spec;
  spec.train_fraction = a.fraction;
  spec.seed = a.seed;
  spec.granularity = parse_granularity(a.granularity);
  const auto split = split_records(records, spec);
  save_pairs_csv(a.out_train, split.train);
  save_pairs_csv(a.out_val, split.val);
  std::cout << "train " << split.train.size() << ", val " << split.val.size() << " (seed "
            << spec.seed << ", " << to_string(spec.granularity) << ")\n";
  return 0;
}

int run_scatter(const ScatterArgs& a) {
  const auto registry = a.registry.empty() ? default_registry() : load_registry_csv(a.registry);
  std::vector<CorrelationReport> reports;
  for (const auto& path : a.reports) reports.push_back(load_report(path));
  const auto rows = accuracy_correlation_table(registry, reports);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + a.out);
  write_scatter_csv(out, rows);
  std::cout << "wrote " << a.out << " (" << rows.size() << " rows)\n";
  return 0;
}

int run_validate(const std::string& features) {
  std::ifstream in(fs::path(features) / kManifestFile);
  if (!in) throw Error("manifest missing in " + features);
  std::ostringstream text;
  text << in.rdbuf();
  const auto manifest = manifest_from_text(text.str());
  auto problems = validate_manifest(manifest);
  if (problems.empty()) {
    const auto payload_problems = FeatureArchive(features, manifest).verify_payloads();
    problems.insert(problems.end(), payload_problems.begin(), payload_problems.end());
  }
  for (const auto& p : problems) std::cout << "violation: " << p << '\n';
  std::cout << manifest.images.size() << " images x " << manifest.layers.size() << " layers, "
            << problems.size() << " violations\n";
  return problems.empty() ? 0 : kDataError;
}

int run_ingest(const IngestArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw Error("cannot open " + a.in);
  const auto database = parse_database(a.format);
  const auto records =
      database == Database::kadid10k ? parse_kadid_dmos(in) : parse_tid_mos(in, database);
  save_pairs_csv(a.out, records);
  if (!a.images_out.empty()) {
    std::ofstream images(a.images_out, std::ios::trunc);
    for (const auto& id : pair_manifest(records)) images << id << '\n';
    if (!images) throw Error("cannot write " + a.images_out);
  }
  std::cout << "parsed " << records.size() << " pairs\n";
  return 0;
}

int run_registry(const std::string& out_path) {
  if (out_path.empty()) {
    write_registry_csv(std::cout, default_registry());
    return 0;
  }
  std::ofstream out(out_path, std::ios::trunc);
  write_registry_csv(out, default_registry());
  if (!out) throw Error("cannot write " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep feature-space image quality analysis"};
  app.require_subcommand(1);

  EvaluateArgs eval;
  auto* evaluate = app.add_subcommand("evaluate", "Layer-wise correlation of distances with MOS");
  evaluate->add_option("--features", eval.features, "Feature archive directory")->required();
  evaluate->add_option("--pairs", eval.pairs, "Canonical pairs CSV")->required();
  evaluate->add_option("--readout", eval.readout, "full|mean|mean_sigma|gram")
      ->check(CLI::IsMember({"full", "mean", "mean_sigma", "gram"}));
  evaluate->add_option("--layers", eval.layers, "Comma-separated layer names or 'all'");
  evaluate->add_flag("--concat", eval.concat, "Concatenate the layers into one distance");
  evaluate->add_option("--weights", eval.weights, "Channel weights file");
  evaluate->add_option("--polarity", eval.polarity, "higher_is_better|higher_is_worse")
      ->check(CLI::IsMember({"higher_is_better", "higher_is_worse"}));
  evaluate->add_flag("--gram-unnormalized", eval.gram_unnormalized,
                     "Do not divide Gram matrices by H*W");
  evaluate->add_flag("--normalize-layers", eval.normalize_layers,
                     "Divide each layer's squared distance by its summary length");
  evaluate->add_option("--baselines", eval.baselines, "CSV of published reference scores");
  evaluate->add_option("--split-info", eval.split_info, "Split provenance recorded in the report");
  evaluate->add_option("--format", eval.format, "csv|json (default: from --out extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  evaluate->add_option("--out", eval.out, "Report path")->required();

  FinetuneArgs fit;
  auto* finetune = app.add_subcommand("finetune", "Fit nonnegative channel weights");
  finetune->add_option("--features", fit.features, "Feature archive directory")->required();
  finetune->add_option("--pairs", fit.pairs, "Canonical pairs CSV (training split)")->required();
  finetune->add_option("--layers", fit.layers, "Comma-separated layer names or 'all'")->required();
  finetune->add_flag("--concat", fit.concat, "Fit one weight vector over the concatenated layers");
  finetune->add_option("--iterations", fit.iterations, "Gradient steps")->check(CLI::PositiveNumber);
  finetune->add_option("--step", fit.step, "Largest weight change per step")->check(CLI::PositiveNumber);
  finetune->add_option("--seed", fit.seed, "Recorded in the weights file");
  finetune->add_option("--surrogate", fit.surrogate)
      ->check(CLI::IsMember({"pearson_on_distance", "pearson_on_log_distance"}));
  finetune->add_option("--polarity", fit.polarity)
      ->check(CLI::IsMember({"higher_is_better", "higher_is_worse"}));
  finetune->add_option("--database", fit.database, "Training database label for provenance");
  finetune->add_option("--out", fit.out, "Weights file")->required();

  SplitArgs sp;
  auto* split = app.add_subcommand("split", "Deterministic train/validation split");
  split->add_option("--pairs", sp.pairs, "Canonical pairs CSV")->required();
  split->add_option("--fraction", sp.fraction, "Training fraction in (0, 1)");
  split->add_option("--seed", sp.seed);
  split->add_option("--granularity", sp.granularity)
      ->check(CLI::IsMember({"by_pair", "by_reference"}));
  split->add_option("--out-train", sp.out_train)->required();
  split->add_option("--out-val", sp.out_val)->required();

  ScatterArgs sc;
  auto* scatter = app.add_subcommand("scatter", "Top-1 accuracy vs best correlation");
  scatter->add_option("--registry", sc.registry, "Registry CSV (default: built-in models)");
  scatter->add_option("--reports", sc.reports, "Report files")->required();
  scatter->add_option("--out", sc.out)->required();

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate", "Check manifest and payload integrity");
  validate->add_option("--features", validate_dir, "Feature archive directory")->required();

  IngestArgs ing;
  auto* ingest = app.add_subcommand("ingest", "Convert a TID/KADID score file to the pairs CSV");
  ingest->add_option("--format", ing.format, "tid2008|tid2013|kadid10k")->required();
  ingest->add_option("--in", ing.in)->required();
  ingest->add_option("--out", ing.out)->required();
  ingest->add_option("--images-out", ing.images_out, "Also write the required image ids");

  std::string registry_out;
  auto* registry = app.add_subcommand("registry", "Print the built-in model registry");
  registry->add_option("--out", registry_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*evaluate) return run_evaluate(eval);
    if (*finetune) return run_finetune(fit);
    if (*split) return run_split(sp);
    if (*scatter) return run_scatter(sc);
    if (*validate) return run_validate(validate_dir);
    if (*ingest) return run_ingest(ing);
    if (*registry) return run_registry(registry_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

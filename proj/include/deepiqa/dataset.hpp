#pragma once

// Opinion-score databases: TID-2008/2013 MOS lists, the KADID-10K table,
// the canonical pair CSV, and deterministic train/validation splits.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepiqa {

enum class Database { tid2008, tid2013, kadid10k };

std::string_view to_string(Database database);
Database parse_database(std::string_view name);

struct PairRecord {
  std::string reference_id;
  std::string distorted_id;
  double mos = 0.0;
  std::optional<int> distortion_type;
  std::optional<int> distortion_level;
  Database database = Database::tid2013;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

/// Whitespace-separated "<mos> <distorted filename>" lines. Filenames follow
/// iRR_TT_L[.bmp] (case-insensitive); ids drop the extension.
std::vector<PairRecord> parse_tid_mos(std::istream& in, Database database);

/// Comma-separated table with a header naming the distorted image
/// (dist_img), the reference image (ref_img) and the score (dmos).
std::vector<PairRecord> parse_kadid_dmos(std::istream& in);

enum class Granularity { by_pair, by_reference };

std::string_view to_string(Granularity granularity);
Granularity parse_granularity(std::string_view name);

inline constexpr std::uint64_t kDefaultSplitSeed = 2013;

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = kDefaultSplitSeed;
  Granularity granularity = Granularity::by_pair;
};

struct Split {
  std::vector<PairRecord> train;
  std::vector<PairRecord> val;
};

/// Number of units sent to the training side: fraction * n rounded to the
/// nearest integer, exact halves rounding down (0.7 * 10125 -> 7087).
std::size_t train_count(double fraction, std::size_t n);

/// Deterministic given the seed and independent of input order: records are
/// sorted by (reference, distorted) id, then shuffled. by_pair cuts the
/// shuffled records, by_reference cuts the shuffled reference ids. Both sides
/// come back sorted by id.
Split split_records(std::span<const PairRecord> records, const SplitSpec& spec);

/// Sorted, deduplicated union of reference and distorted ids.
std::vector<std::string> pair_manifest(std::span<const PairRecord> records);

/// Canonical CSV: database,reference_id,distorted_id,mos,distortion_type,distortion_level
void write_pairs_csv(std::ostream& out, std::span<const PairRecord> records);
std::vector<PairRecord> read_pairs_csv(std::istream& in);

std::vector<PairRecord> load_pairs_csv(const std::filesystem::path& path);
void save_pairs_csv(const std::filesystem::path& path, std::span<const PairRecord> records);

}  // namespace deepiqa

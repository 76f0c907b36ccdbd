#include "deepiqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <regex>
#include <set>
#include <tuple>
#include <utility>

#include "deepiqa/error.hpp"
#include "deepiqa/text.hpp"

namespace deepiqa {

std::string_view to_string(Database database) {
  switch (database) {
    case Database::tid2008: return "TID2008";
    case Database::tid2013: return "TID2013";
    case Database::kadid10k: return "KADID10K";
  }
  return "?";
}

Database parse_database(std::string_view name) {
  std::string key;
  for (char ch : text::to_lower(name)) {
    if (ch != '-' && ch != '_') key += ch;
  }
  if (key == "tid2008") return Database::tid2008;
  if (key == "tid2013") return Database::tid2013;
  if (key == "kadid10k") return Database::kadid10k;
  throw Error("unknown database '" + std::string(name) + "'");
}

std::string_view to_string(Granularity granularity) {
  return granularity == Granularity::by_pair ? "by_pair" : "by_reference";
}

Granularity parse_granularity(std::string_view name) {
  if (name == "by_pair") return Granularity::by_pair;
  if (name == "by_reference") return Granularity::by_reference;
  throw Error("unknown split granularity '" + std::string(name) + "'");
}

namespace {

std::string strip_extension(std::string_view filename) {
  const auto dot = filename.rfind('.');
  return std::string(dot == std::string_view::npos ? filename : filename.substr(0, dot));
}

std::string line_prefix(std::size_t line_number) {
  return "line " + std::to_string(line_number) + ": ";
}

void check_mos_range(double mos, double lo, double hi, std::size_t line_number) {
  if (!std::isfinite(mos) || mos < lo || mos > hi) {
    throw Error(line_prefix(line_number) + "score " + text::format_double(mos) +
                " outside [" + text::format_double(lo) + ", " + text::format_double(hi) + "]");
  }
}

void check_unique(std::set<std::pair<std::string, std::string>>& seen, const PairRecord& r,
                  std::size_t line_number) {
  if (!seen.emplace(r.reference_id, r.distorted_id).second) {
    throw Error(line_prefix(line_number) + "duplicate pair (" + r.reference_id + ", " +
                r.distorted_id + ")");
  }
}

}  // namespace

std::vector<PairRecord> parse_tid_mos(std::istream& in, Database database) {
  if (database == Database::kadid10k) {
    throw Error("parse_tid_mos handles TID databases only");
  }
  static const std::regex kName(R"(^(i\d{2})_(\d{2})_(\d)(\.bmp)?$)",
                                std::regex::icase | std::regex::ECMAScript);
  std::vector<PairRecord> records;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto fields = text::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw Error(line_prefix(line_number) + "expected '<mos> <filename>'");
    }
    PairRecord r;
    r.database = database;
    try {
      r.mos = text::parse_double(fields[0]);
    } catch (const Error&) {
      throw Error(line_prefix(line_number) + "unparseable score '" + fields[0] + "'");
    }
    check_mos_range(r.mos, 0.0, 9.0, line_number);
    std::smatch m;
    if (!std::regex_match(fields[1], m, kName)) {
      throw Error(line_prefix(line_number) + "filename '" + fields[1] +
                  "' does not match iRR_TT_L.bmp");
    }
    r.reference_id = m[1].str();
    r.distorted_id = strip_extension(fields[1]);
    r.distortion_type = std::stoi(m[2].str());
    r.distortion_level = std::stoi(m[3].str());
    check_unique(seen, r, line_number);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PairRecord> parse_kadid_dmos(std::istream& in) {
  static const std::regex kName(R"(^(i\d{2})_(\d{2})_(\d{2})$)",
                                std::regex::icase | std::regex::ECMAScript);
  std::string line;
  std::size_t line_number = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_number;
    if (!text::trim(line).empty()) {
      header = text::split(line, ',');
      break;
    }
  }
  if (header.empty()) throw Error("KADID table has no header");

  const auto column = [&](std::initializer_list<std::string_view> names,
                          std::string_view label) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      const auto key = text::to_lower(header[i]);
      for (auto name : names) {
        if (key == name) return i;
      }
    }
    throw Error("KADID table is missing the " + std::string(label) + " column");
  };
  const auto dist_col = column({"dist_img", "distorted_image", "distorted"}, "dist_img");
  const auto ref_col = column({"ref_img", "reference_image", "reference"}, "ref_img");
  const auto score_col = column({"dmos", "mos", "score"}, "dmos");
  const auto needed = std::max({dist_col, ref_col, score_col}) + 1;

  std::vector<PairRecord> records;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() < needed) {
      throw Error(line_prefix(line_number) + "expected at least " + std::to_string(needed) +
                  " columns");
    }
    PairRecord r;
    r.database = Database::kadid10k;
    r.distorted_id = strip_extension(fields[dist_col]);
    r.reference_id = strip_extension(fields[ref_col]);
    if (r.distorted_id.empty() || r.reference_id.empty()) {
      throw Error(line_prefix(line_number) + "empty image name");
    }
    try {
      r.mos = text::parse_double(fields[score_col]);
    } catch (const Error&) {
      throw Error("row " + std::to_string(line_number) + ": unparseable score '" +
                  fields[score_col] + "'");
    }
    check_mos_range(r.mos, 1.0, 5.0, line_number);
    std::smatch m;
    if (std::regex_match(r.distorted_id, m, kName)) {
      r.distortion_type = std::stoi(m[2].str());
      r.distortion_level = std::stoi(m[3].str());
    }
    check_unique(seen, r, line_number);
    records.push_back(std::move(r));
  }
  return records;
}

std::size_t train_count(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error("train fraction must lie in (0, 1), got " + text::format_double(fraction));
  }
  const double exact = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(exact - 0.5));
}

namespace {

// Portable Fisher-Yates: std::shuffle and std::uniform_int_distribution are
// implementation-defined, this is bit-identical across standard libraries.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = 0;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(items[i - 1], items[static_cast<std::size_t>(draw % bound)]);
  }
}

bool by_ids(const PairRecord& a, const PairRecord& b) {
  return std::tie(a.reference_id, a.distorted_id) < std::tie(b.reference_id, b.distorted_id);
}

}  // namespace

Split split_records(std::span<const PairRecord> records, const SplitSpec& spec) {
  if (records.empty()) throw Error("cannot split an empty record set");
  std::vector<PairRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), by_ids);

  Split split;
  if (spec.granularity == Granularity::by_pair) {
    const auto cut = train_count(spec.train_fraction, sorted.size());
    deterministic_shuffle(sorted, spec.seed);
    split.train.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut));
    split.val.assign(sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
  } else {
    std::vector<std::string> refs;
    for (const auto& r : sorted) {
      if (refs.empty() || refs.back() != r.reference_id) refs.push_back(r.reference_id);
    }
    const auto cut = train_count(spec.train_fraction, refs.size());
    deterministic_shuffle(refs, spec.seed);
    const std::set<std::string> train_refs(refs.begin(),
                                           refs.begin() + static_cast<std::ptrdiff_t>(cut));
    for (auto& r : sorted) {
      (train_refs.contains(r.reference_id) ? split.train : split.val).push_back(std::move(r));
    }
  }
  std::sort(split.train.begin(), split.train.end(), by_ids);
  std::sort(split.val.begin(), split.val.end(), by_ids);
  return split;
}

std::vector<std::string> pair_manifest(std::span<const PairRecord> records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    ids.insert(r.reference_id);
    ids.insert(r.distorted_id);
  }
  return {ids.begin(), ids.end()};
}

namespace {
constexpr std::string_view kPairsHeader =
    "database,reference_id,distorted_id,mos,distortion_type,distortion_level";
}

void write_pairs_csv(std::ostream& out, std::span<const PairRecord> records) {
  out << kPairsHeader << '\n';
  for (const auto& r : records) {
    out << to_string(r.database) << ',' << r.reference_id << ',' << r.distorted_id << ','
        << text::format_double(r.mos) << ',';
    if (r.distortion_type) out << *r.distortion_type;
    out << ',';
    if (r.distortion_level) out << *r.distortion_level;
    out << '\n';
  }
}

std::vector<PairRecord> read_pairs_csv(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  std::vector<PairRecord> records;
  std::set<std::tuple<Database, std::string, std::string>> seen;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    if (!have_header) {
      if (text::trim(line) != kPairsHeader) {
        throw Error("pairs file header must be '" + std::string(kPairsHeader) + "'");
      }
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 6) throw Error(line_prefix(line_number) + "expected 6 columns");
    try {
      PairRecord r;
      r.database = parse_database(f[0]);
      r.reference_id = f[1];
      r.distorted_id = f[2];
      r.mos = text::parse_double(f[3]);
      if (!f[4].empty()) r.distortion_type = static_cast<int>(text::parse_integer(f[4]));
      if (!f[5].empty()) r.distortion_level = static_cast<int>(text::parse_integer(f[5]));
      if (r.reference_id.empty() || r.distorted_id.empty()) throw Error("empty image id");
      if (!std::isfinite(r.mos)) throw Error("non-finite score");
      if (!seen.emplace(r.database, r.reference_id, r.distorted_id).second) {
        throw Error("duplicate pair (" + r.reference_id + ", " + r.distorted_id + ")");
      }
      records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(line_prefix(line_number) + e.what());
    }
  }
  if (!have_header) throw Error("pairs file is empty");
  return records;
}

std::vector<PairRecord> load_pairs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pairs file " + path.string());
  try {
    return read_pairs_csv(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_pairs_csv(const std::filesystem::path& path, std::span<const PairRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_pairs_csv(out, records);
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace deepiqa

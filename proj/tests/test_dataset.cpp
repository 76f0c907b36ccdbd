#include <doctest.h>

#include <cstdio>
#include <set>
#include <sstream>

#include "deepiqa/dataset.hpp"
#include "deepiqa/error.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace deepiqa;

namespace {

// Same layout as the published score files: TID-2013 has 25 references x 24
// distortion types x 5 levels, TID-2008 25 x 17 x 4, KADID-10K 81 x 25 x 5.
std::string tid_file(int types, int levels, unsigned seed) {
  gen::Rng rng(seed);
  std::uniform_real_distribution<double> mos(0.2, 7.2);
  std::ostringstream os;
  char name[32];
  for (int r = 1; r <= 25; ++r)
    for (int t = 1; t <= types; ++t)
      for (int l = 1; l <= levels; ++l) {
        std::snprintf(name, sizeof name, "i%02d_%02d_%d.bmp", r, t, l);
        os << mos(rng) << ' ' << name << '\n';
      }
  return os.str();
}

std::string kadid_file(unsigned seed) {
  gen::Rng rng(seed);
  std::uniform_real_distribution<double> mos(1.0, 5.0);
  std::ostringstream os;
  os << "dist_img,ref_img,dmos,var\n";
  char dist[32], ref[16];
  for (int r = 1; r <= 81; ++r)
    for (int t = 1; t <= 25; ++t)
      for (int l = 1; l <= 5; ++l) {
        std::snprintf(dist, sizeof dist, "I%02d_%02d_%02d.png", r, t, l);
        std::snprintf(ref, sizeof ref, "I%02d.png", r);
        os << dist << ',' << ref << ',' << mos(rng) << ",0.5\n";
      }
  return os.str();
}

std::vector<PairRecord> parse_tid(const std::string& text, Database db = Database::tid2013) {
  std::istringstream in(text);
  return parse_tid_mos(in, db);
}

std::vector<PairRecord> parse_kadid(const std::string& text) {
  std::istringstream in(text);
  return parse_kadid_dmos(in);
}

}  // namespace

TEST_CASE("TID score lines") {
  const auto records = parse_tid("5.51429 i01_01_1.bmp\n\n4.2 I25_24_5.BMP\n");
  REQUIRE(records.size() == 2);
  CHECK(records[0].reference_id == "i01");
  CHECK(records[0].distorted_id == "i01_01_1");
  CHECK(records[0].mos == 5.51429);
  CHECK(records[0].distortion_type == 1);
  CHECK(records[0].distortion_level == 1);
  CHECK(records[0].database == Database::tid2013);
  CHECK(records[1].reference_id == "I25");
  CHECK(records[1].distortion_type == 24);
  CHECK(records[1].distortion_level == 5);

  CHECK_THROWS_WITH_AS(parse_tid("5.1 i01_01_1.bmp\nabc i01_01_2.bmp\n"),
                       doctest::Contains("line 2"), Error);
  CHECK_THROWS_WITH_AS(parse_tid("5.1 i01_01_1.bmp extra\n"), doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(parse_tid("5.1 img01.bmp\n"), doctest::Contains("iRR_TT_L"), Error);
  CHECK_THROWS_AS(parse_tid("9.5 i01_01_1.bmp\n"), Error);
  CHECK_THROWS_WITH_AS(parse_tid("5 i01_01_1.bmp\n4 i01_01_1.bmp\n"), doctest::Contains("duplicate"),
                       Error);
}

TEST_CASE("full-size TID files") {
  const auto tid2013 = parse_tid(tid_file(24, 5, 1));
  CHECK(tid2013.size() == 3000);
  const auto ids = pair_manifest(tid2013);
  CHECK(ids.size() == 3025);

  const auto tid2008 = parse_tid(tid_file(17, 4, 2), Database::tid2008);
  CHECK(tid2008.size() == 1700);
  for (const auto& r : tid2008) {
    CHECK(r.database == Database::tid2008);
    CHECK(r.mos >= 0.0);
    CHECK(r.mos <= 9.0);
  }
}

TEST_CASE("KADID table") {
  const auto one = parse_kadid("dist_img,ref_img,dmos,var\nI01_01_01.png,I01.png,4.57,0.30\n");
  REQUIRE(one.size() == 1);
  CHECK(one[0].reference_id == "I01");
  CHECK(one[0].distorted_id == "I01_01_01");
  CHECK(one[0].mos == 4.57);
  CHECK(one[0].distortion_type == 1);
  CHECK(one[0].distortion_level == 1);
  CHECK(one[0].database == Database::kadid10k);

  CHECK(parse_kadid("dist_img,ref_img,dmos,var\n").empty());
  CHECK(parse_kadid(kadid_file(3)).size() == 10125);

  CHECK_THROWS_WITH_AS(parse_kadid("dist_img,dmos\nI01_01_01.png,4\n"),
                       doctest::Contains("ref_img"), Error);
  CHECK_THROWS_WITH_AS(
      parse_kadid("dist_img,ref_img,dmos\nI01_01_01.png,I01.png,4\nI01_01_02.png,I01.png,x\n"),
      doctest::Contains("row 3"), Error);
  CHECK_THROWS_AS(parse_kadid(""), Error);
}

TEST_CASE("train count rounds exact halves down") {
  CHECK(train_count(0.7, 10125) == 7087);
  CHECK(train_count(0.7, 10) == 7);
  CHECK(train_count(0.29, 100) == 29);
  CHECK(train_count(0.5, 3) == 1);
  CHECK_THROWS_AS(train_count(0.0, 10), Error);
  CHECK_THROWS_AS(train_count(1.0, 10), Error);
}

TEST_CASE("pair-level split") {
  const auto records = parse_kadid(kadid_file(4));
  const auto split = split_records(records, {});
  CHECK(split.train.size() == 7087);
  CHECK(split.val.size() == 3038);

  std::set<std::string> train_ids, val_ids;
  for (const auto& r : split.train) train_ids.insert(r.distorted_id);
  for (const auto& r : split.val) val_ids.insert(r.distorted_id);
  CHECK(train_ids.size() + val_ids.size() == records.size());
  for (const auto& id : val_ids) CHECK_FALSE(train_ids.contains(id));

  const auto again = split_records(records, {});
  CHECK(again.train == split.train);
  CHECK(again.val == split.val);

  // Input order does not matter.
  auto reversed = records;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(split_records(reversed, {}).val == split.val);

  // A different seed gives a different partition.
  SplitSpec other;
  other.seed = 7;
  CHECK(split_records(records, other).val != split.val);

  SplitSpec bad;
  bad.train_fraction = 1.5;
  CHECK_THROWS_AS(split_records(records, bad), Error);
  CHECK_THROWS_AS(split_records(std::vector<PairRecord>{}, {}), Error);
}

TEST_CASE("reference-level split keeps references on one side") {
  std::vector<PairRecord> records;
  for (int r = 0; r < 10; ++r)
    for (int d = 0; d < 6; ++d)
      records.push_back({"ref" + std::to_string(r), "ref" + std::to_string(r) + "_" + std::to_string(d),
                         1.0 + d * 0.5, std::nullopt, std::nullopt, Database::kadid10k});
  SplitSpec spec;
  spec.granularity = Granularity::by_reference;
  const auto split = split_records(records, spec);
  std::set<std::string> train_refs, val_refs;
  for (const auto& r : split.train) train_refs.insert(r.reference_id);
  for (const auto& r : split.val) val_refs.insert(r.reference_id);
  CHECK(train_refs.size() == 7);
  CHECK(val_refs.size() == 3);
  for (const auto& ref : train_refs) CHECK_FALSE(val_refs.contains(ref));
  CHECK(split.train.size() + split.val.size() == records.size());
}

TEST_CASE("pair manifest") {
  std::vector<PairRecord> records{{"r", "r_1", 1.0, {}, {}, Database::tid2013},
                                  {"r", "r_2", 2.0, {}, {}, Database::tid2013}};
  CHECK(pair_manifest(records) == std::vector<std::string>{"r", "r_1", "r_2"});
  CHECK(pair_manifest(std::vector<PairRecord>{}).empty());
}

TEST_CASE("canonical pairs CSV round-trips") {
  auto records = parse_tid(tid_file(3, 2, 9));
  records.push_back({"I01", "I01_x", 3.25, std::nullopt, std::nullopt, Database::kadid10k});
  std::ostringstream out;
  write_pairs_csv(out, records);
  std::istringstream in(out.str());
  CHECK(read_pairs_csv(in) == records);

  support::TempDir dir;
  save_pairs_csv(dir / "p.csv", records);
  CHECK(load_pairs_csv(dir / "p.csv") == records);

  std::istringstream bad_header("db,ref\n");
  CHECK_THROWS_AS(read_pairs_csv(bad_header), Error);
  std::istringstream bad_row(
      "database,reference_id,distorted_id,mos,distortion_type,distortion_level\nTID2013,a,b,??,,\n");
  CHECK_THROWS_WITH_AS(read_pairs_csv(bad_row), doctest::Contains("line 2"), Error);
}

TEST_CASE("database names") {
  CHECK(parse_database("TID-2013") == Database::tid2013);
  CHECK(parse_database("kadid10k") == Database::kadid10k);
  CHECK(parse_database("tid_2008") == Database::tid2008);
  CHECK_THROWS_AS(parse_database("live"), Error);
}

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "deepiqa/error.hpp"
#include "deepiqa/finetune.hpp"
#include "support/archives.hpp"
#include "support/planted.hpp"
#include "support/temp_dir.hpp"

using namespace deepiqa;

namespace {

double score_of(const ContributionTable& t, const std::vector<double>& w) {
  return correlation_score(weighted_distances(t, w), t.mos, Polarity::higher_is_better);
}

}  // namespace

TEST_CASE("contribution table from an archive") {
  // Two images, reference all zeros, distorted differs by 3 in channel 1.
  auto manifest = support::make_manifest({"ref", "dist", "same"},
                                         {{"input", 0, {1, 2, 2}}, {"conv", 1, {1, 1, 3}}});
  TensorMap tensors;
  tensors.emplace(TensorKey{"ref", "input"}, FeatureMap({1, 2, 2}, {0, 0, 0, 0}));
  tensors.emplace(TensorKey{"dist", "input"}, FeatureMap({1, 2, 2}, {0, 3, 0, 0}));
  tensors.emplace(TensorKey{"same", "input"}, FeatureMap({1, 2, 2}, {0, 0, 0, 0}));
  tensors.emplace(TensorKey{"ref", "conv"}, FeatureMap({1, 1, 3}, {1, 1, 1}));
  tensors.emplace(TensorKey{"dist", "conv"}, FeatureMap({1, 1, 3}, {1, 1, 2}));
  tensors.emplace(TensorKey{"same", "conv"}, FeatureMap({1, 1, 3}, {1, 1, 1}));
  support::TempDir dir;
  write_archive(dir / "a", manifest, tensors);
  const auto archive = read_archive(dir / "a");

  const std::vector<PairRecord> records{{"ref", "dist", 2.0, {}, {}, Database::tid2013},
                                        {"ref", "same", 6.0, {}, {}, Database::tid2013}};
  const std::vector<std::string> layers{"input", "conv"};
  const auto table = build_contribution_table(archive, records, layers);
  CHECK(table.cols == 5);
  CHECK(table.spans[1] == LayerSpan{"conv", 2, 3});
  CHECK(table.mos == std::vector<double>{2.0, 6.0});
  CHECK(std::vector<double>(table.row(0).begin(), table.row(0).end()) ==
        std::vector<double>{0, 9, 0, 0, 1});
  CHECK(std::vector<double>(table.row(1).begin(), table.row(1).end()) ==
        std::vector<double>(5, 0.0));

  const std::vector<PairRecord> missing{{"ref", "ghost", 2.0, {}, {}, Database::tid2013}};
  CHECK_THROWS_WITH_AS(build_contribution_table(archive, missing, layers),
                       doctest::Contains("(ref, ghost)"), Error);
}

TEST_CASE("planted channel dominates the fitted weights") {
  gen::Rng rng(42);
  const auto train = support::planted_table(rng, 400, 16, 3);
  const auto held_out = support::planted_table(rng, 400, 16, 3);
  const auto fit = fit_channel_weights(train, Polarity::higher_is_better, {});
  const auto w = flatten_weights(fit.weights, train.spans);
  double others = 0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    CHECK(w[c] >= 0.0);
    if (c != 3) others = std::max(others, w[c]);
  }
  CHECK(w[3] > 10 * others);
  const std::vector<double> ones(16, 1.0);
  CHECK(score_of(held_out, w) > score_of(held_out, ones));
  CHECK(fit.report.final_score >= fit.report.initial_score - 1e-9);
  CHECK_FALSE(fit.report.reverted);
}

TEST_CASE("surrogate trace never decreases") {
  gen::Rng rng(3);
  for (auto surrogate : {Surrogate::pearson_on_distance, Surrogate::pearson_on_log_distance}) {
    const auto table = support::planted_table(rng, 200, 8, 0, 6.0);
    FitConfig config;
    config.iterations = 60;
    config.surrogate = surrogate;
    const auto fit = fit_channel_weights(table, Polarity::higher_is_better, config);
    const auto& trace = fit.report.surrogate_trace;
    REQUIRE(trace.size() == 61);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
  }
}

TEST_CASE("fitting is deterministic") {
  gen::Rng rng(8);
  const auto table = support::planted_table(rng, 150, 6);
  const auto a = fit_channel_weights(table, Polarity::higher_is_better, {});
  const auto b = fit_channel_weights(table, Polarity::higher_is_better, {});
  CHECK(a.weights == b.weights);
  CHECK(a.report.surrogate_trace == b.report.surrogate_trace);
}

TEST_CASE("degenerate tables") {
  gen::Rng rng(9);
  SUBCASE("one channel: score equals the unweighted score") {
    auto table = ContributionTable::make({{"l", 0, 1}}, 50);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t r = 0; r < 50; ++r) {
      table.mos[r] = 1 + 4 * u(rng);
      table.row(r)[0] = u(rng);
    }
    const auto fit = fit_channel_weights(table, Polarity::higher_is_better, {});
    const auto w = flatten_weights(fit.weights, table.spans);
    CHECK(w[0] > 0.0);
    CHECK(fit.report.final_score == fit.report.initial_score);
  }
  SUBCASE("identical columns: any weighting scores like all-ones") {
    auto table = ContributionTable::make({{"l", 0, 4}}, 60);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t r = 0; r < 60; ++r) {
      table.mos[r] = 1 + 4 * u(rng);
      const double v = u(rng) + 0.5 * (5 - table.mos[r]);
      for (auto& x : table.row(r)) x = v;
    }
    const auto fit = fit_channel_weights(table, Polarity::higher_is_better, {});
    CHECK(fit.report.final_score == doctest::Approx(fit.report.initial_score).epsilon(1e-12));
    CHECK(score_of(table, {0.2, 0, 3, 1}) == score_of(table, std::vector<double>(4, 1.0)));
  }
  SUBCASE("constant scores") {
    auto table = ContributionTable::make({{"l", 0, 2}}, 5);
    for (std::size_t r = 0; r < 5; ++r) {
      table.mos[r] = 3.0;
      table.row(r)[0] = double(r);
    }
    CHECK_THROWS_WITH_AS(fit_channel_weights(table, Polarity::higher_is_better, {}),
                         doctest::Contains("constant"), Error);
  }
  SUBCASE("bad configuration") {
    const auto table = support::planted_table(rng, 20, 4);
    FitConfig config;
    config.step = 0.0;
    CHECK_THROWS_AS(fit_channel_weights(table, Polarity::higher_is_better, config), Error);
    config = {};
    config.iterations = 0;
    CHECK_THROWS_AS(fit_channel_weights(table, Polarity::higher_is_better, config), Error);
  }
}

TEST_CASE("apply_weights") {
  std::vector<LayerSpan> spans{{"a", 0, 2}, {"b", 2, 2}};
  const std::vector<double> row{1, 4, 9, 16};
  ChannelWeights ones, pick;
  ones.set("a", {1, 1});
  ones.set("b", {1, 1});
  pick.set("a", {0, 0});
  pick.set("b", {0, 1});
  CHECK(apply_weights(row, spans, ones) == std::sqrt(30.0));
  CHECK(apply_weights(row, spans, pick) == 4.0);

  ChannelWeights short_weights;
  short_weights.set("a", {1, 1});
  short_weights.set("b", {1});
  CHECK_THROWS_AS(apply_weights(row, spans, short_weights), Error);
  ChannelWeights missing;
  missing.set("a", {1, 1});
  CHECK_THROWS_AS(apply_weights(row, spans, missing), Error);

  gen::Rng rng(10);
  std::uniform_real_distribution<double> u(0, 2);
  for (int i = 0; i < 20; ++i) {
    LayerMaps x, y;
    ChannelWeights w;
    double expected = 0;
    for (const std::string layer : {"p", "q"}) {
      const Shape s{2, 3, 3};
      x.emplace(layer, gen::random_map(rng, s));
      y.emplace(layer, gen::random_map(rng, s));
      std::vector<double> wl(3);
      for (auto& v : wl) v = u(rng);
      const auto& a = x.at(layer);
      const auto& b = y.at(layer);
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t ww = 0; ww < 3; ++ww)
          for (std::size_t c = 0; c < 3; ++c) {
            const double d = double(a.at(h, ww, c)) - double(b.at(h, ww, c));
            expected += wl[c] * d * d;
          }
      w.set(layer, wl);
    }
    const std::vector<std::string> layers{"p", "q"};
    CHECK(apply_weights(x, y, layers, w) == doctest::Approx(std::sqrt(expected)).epsilon(1e-6));
  }
}

TEST_CASE("weights document round-trips") {
  WeightsDocument doc;
  doc.weights.set("conv5", {0.0, 1.25, 3.0e-7});
  doc.weights.set("pool5", {2.0});
  doc.training_database = "TID2008";
  doc.concatenate = true;
  doc.config.iterations = 17;
  doc.config.step = 0.25;
  doc.config.seed = 99;
  doc.config.surrogate = Surrogate::pearson_on_log_distance;
  doc.fits.push_back({{"conv5", "pool5"}, FitReport{{0.5, 0.6}, 0.4, 0.7, 1, false}});

  const auto back = weights_from_text(weights_to_text(doc));
  CHECK(back.weights == doc.weights);
  CHECK(back.training_database == "TID2008");
  CHECK(back.concatenate);
  CHECK(back.config.iterations == 17);
  CHECK(back.config.seed == 99);
  CHECK(back.config.surrogate == Surrogate::pearson_on_log_distance);
  REQUIRE(back.fits.size() == 1);
  CHECK(back.fits[0].report.surrogate_trace == std::vector<double>{0.5, 0.6});

  CHECK_THROWS_AS(weights_from_text("{\"kind\": \"other\"}"), Error);
  CHECK_THROWS_AS(
      weights_from_text(R"({"kind":"channel-weights","layers":[{"name":"a","weights":[-1]}]})"),
      Error);
}

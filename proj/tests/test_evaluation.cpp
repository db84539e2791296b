#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"

#include "d2lv/errors.hpp"
#include "d2lv/evaluation.hpp"
#include "d2lv/rng.hpp"
#include "d2lv/types.hpp"

using namespace d2lv;
using namespace d2lv::eval;

namespace {

PairScore ps(const std::string& q, const std::string& r, double score) {
  return PairScore{ImageId(q), ImageId(r), score};
}

GroundTruth gt_of(const std::vector<std::pair<std::string, std::string>>& positives,
                  std::size_t total = 0) {
  std::vector<std::pair<ImageId, ImageId>> rows;
  rows.reserve(positives.size());
  for (const auto& [q, r] : positives) rows.emplace_back(ImageId(q), ImageId(r));
  return GroundTruth::from_pairs(rows, total);
}

// Quadratic oracle: precision at each hit recomputed from scratch over the prefix.
double micro_ap_oracle(const RankedPairList& ranked, const GroundTruth& gt) {
  const auto& pairs = ranked.pairs();
  double acc = 0.0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    if (!gt.contains(pairs[r])) continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i <= r; ++i) {
      if (gt.contains(pairs[i])) ++hits;
    }
    acc += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return acc / static_cast<double>(gt.total_positives);
}

} // namespace

TEST_CASE("micro_ap fixtures") {
  // Ranked [TP, FP, TP].
  const auto ranked = RankedPairList::from_pairs(
      {ps("Q1", "R1", 0.9), ps("Q2", "R9", 0.8), ps("Q3", "R3", 0.7)});
  const GroundTruth two = gt_of({{"Q1", "R1"}, {"Q3", "R3"}});
  CHECK(micro_ap(ranked, two) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  const GroundTruth three = gt_of({{"Q1", "R1"}, {"Q3", "R3"}, {"Q4", "R4"}});
  CHECK(micro_ap(ranked, three) == doctest::Approx(5.0 / 9.0).epsilon(1e-12));

  // Perfect ranking: positives first, distractors after.
  const auto perfect = RankedPairList::from_pairs(
      {ps("Q1", "R1", 0.9), ps("Q2", "R2", 0.8), ps("Q3", "R9", 0.1)});
  CHECK(micro_ap(perfect, gt_of({{"Q1", "R1"}, {"Q2", "R2"}})) == 1.0);
}

TEST_CASE("recall_at_precision fixtures") {
  std::vector<PairScore> rows;
  std::vector<std::pair<std::string, std::string>> positives;
  for (int i = 0; i < 9; ++i) {
    const std::string q = "Q" + std::to_string(i);
    rows.push_back(ps(q, "R1", 1.0 - 0.01 * i));
    positives.push_back({q, "R1"});
  }
  rows.push_back(ps("QX", "R9", 0.1)); // trailing FP keeps precision@10 at 0.9
  const auto ranked = RankedPairList::from_pairs(rows);
  CHECK(recall_at_precision(ranked, gt_of(positives), 0.90) == 1.0);

  // Precision never reaches the target.
  const auto weak = RankedPairList::from_pairs({ps("Q1", "R9", 0.9), ps("Q2", "R2", 0.8)});
  CHECK(recall_at_precision(weak, gt_of({{"Q2", "R2"}}), 0.90) == 0.0);

  // Empty list.
  CHECK(recall_at_precision(RankedPairList::from_pairs({}), gt_of({{"Q", "R"}}), 0.90) == 0.0);
}

TEST_CASE("recall_at_precision is nonincreasing in the target") {
  Rng rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PairScore> rows;
    std::vector<std::pair<std::string, std::string>> positives;
    const int n = 20 + static_cast<int>(rng.index(30));
    for (int i = 0; i < n; ++i) {
      const std::string q = "Q" + std::to_string(i);
      rows.push_back(ps(q, "R0", rng.uniform(0.0, 1.0)));
      if (rng.chance(0.5)) positives.push_back({q, "R0"});
    }
    if (positives.empty()) positives.push_back({"QX", "R0"});
    const auto ranked = RankedPairList::from_pairs(rows);
    const GroundTruth gt = gt_of(positives);
    double previous = 1.0;
    for (double target : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      const double r = recall_at_precision(ranked, gt, target);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      CHECK(r <= previous + 1e-15);
      previous = r;
    }
  }
}

TEST_CASE("pr_curve fixtures and recount oracle") {
  const auto hit = RankedPairList::from_pairs({ps("Q1", "R1", 0.5)});
  const auto hit_curve = pr_curve(hit, gt_of({{"Q1", "R1"}}));
  REQUIRE(hit_curve.size() == 1);
  CHECK(hit_curve[0] == std::pair{1.0, 1.0});

  const auto miss_curve = pr_curve(hit, gt_of({{"Q9", "R9"}}));
  REQUIRE(miss_curve.size() == 1);
  CHECK(miss_curve[0] == std::pair{0.0, 0.0});

  Rng rng(82);
  std::vector<PairScore> rows;
  std::vector<std::pair<std::string, std::string>> positives;
  for (int i = 0; i < 200; ++i) {
    const std::string q = "Q" + std::to_string(i);
    rows.push_back(ps(q, "R0", rng.uniform(0.0, 1.0)));
    if (rng.chance(0.4)) positives.push_back({q, "R0"});
  }
  const auto ranked = RankedPairList::from_pairs(rows);
  const GroundTruth gt = gt_of(positives);
  const auto curve = pr_curve(ranked, gt);
  REQUIRE(curve.size() == ranked.size());
  double last_recall = 0.0;
  for (std::size_t r = 0; r < curve.size(); ++r) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i <= r; ++i) {
      if (gt.contains(ranked.pairs()[i])) ++hits;
    }
    CHECK(curve[r].first ==
          doctest::Approx(static_cast<double>(hits) / static_cast<double>(gt.total_positives))
              .epsilon(1e-12));
    CHECK(curve[r].second ==
          doctest::Approx(static_cast<double>(hits) / static_cast<double>(r + 1)).epsilon(1e-12));
    CHECK(curve[r].first >= last_recall); // recall is monotone
    last_recall = curve[r].first;
  }
}

TEST_CASE("micro_ap equals the quadratic oracle on random instances") {
  Rng rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 200 + static_cast<int>(rng.index(1800));
    std::vector<PairScore> rows;
    std::vector<std::pair<std::string, std::string>> positives;
    for (int i = 0; i < n; ++i) {
      const std::string q = "Q" + std::to_string(i % 50);
      const std::string r = "R" + std::to_string(i);
      // Quantized scores provoke ties.
      rows.push_back(ps(q, r, static_cast<double>(rng.index(100)) / 100.0));
      if (rng.chance(0.3)) positives.push_back({q, r});
    }
    if (positives.empty()) positives.push_back({"QX", "RX"});
    const std::size_t extra = rng.index(5); // positives never retrieved
    const auto ranked = RankedPairList::from_pairs(rows);
    const GroundTruth gt = gt_of(positives, positives.size() + extra);
    CHECK(micro_ap(ranked, gt) == doctest::Approx(micro_ap_oracle(ranked, gt)).epsilon(1e-9));
  }
}

TEST_CASE("micro_ap is invariant under strictly monotone score transforms") {
  Rng rng(84);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PairScore> rows, affine, expo;
    std::vector<std::pair<std::string, std::string>> positives;
    for (int i = 0; i < 300; ++i) {
      const std::string q = "Q" + std::to_string(i % 20);
      const std::string r = "R" + std::to_string(i);
      const double s = static_cast<double>(rng.index(1000)) / 1000.0;
      rows.push_back(ps(q, r, s));
      affine.push_back(ps(q, r, 3.0 * s + 2.0));
      expo.push_back(ps(q, r, std::exp(s)));
      if (rng.chance(0.25)) positives.push_back({q, r});
    }
    if (positives.empty()) positives.push_back({"QX", "RX"});
    const GroundTruth gt = gt_of(positives);
    const double base = micro_ap(RankedPairList::from_pairs(rows), gt);
    CHECK(micro_ap(RankedPairList::from_pairs(affine), gt) == base);
    CHECK(micro_ap(RankedPairList::from_pairs(expo), gt) == base);
  }
}

TEST_CASE("false-positive surgery moves micro_ap the right way") {
  Rng rng(85);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<PairScore> rows;
    std::vector<std::pair<std::string, std::string>> positives;
    double min_score = 2.0;
    std::size_t victim = 0;
    bool has_fp = false;
    for (int i = 0; i < 100; ++i) {
      const std::string q = "Q" + std::to_string(i);
      const double s = rng.uniform(0.1, 1.0);
      rows.push_back(ps(q, "R0", s));
      if (rng.chance(0.4)) {
        positives.push_back({q, "R0"});
      } else {
        victim = rows.size() - 1;
        has_fp = true;
      }
      min_score = std::min(min_score, s);
    }
    if (positives.empty()) positives.push_back({"QZ", "R0"});
    const GroundTruth gt = gt_of(positives);
    const double base = micro_ap(RankedPairList::from_pairs(rows), gt);

    if (has_fp) {
      std::vector<PairScore> pruned = rows;
      pruned.erase(pruned.begin() + static_cast<std::ptrdiff_t>(victim));
      CHECK(micro_ap(RankedPairList::from_pairs(pruned), gt) >= base - 1e-15);
    }

    std::vector<PairScore> padded = rows;
    for (int i = 0; i < 10; ++i) {
      padded.push_back(ps("QPAD" + std::to_string(i), "R9", min_score * 0.5 - 0.001 * i));
    }
    CHECK(micro_ap(RankedPairList::from_pairs(padded), gt) == base);
  }
}

TEST_CASE("ties order by (query, reference) and duplicates are rejected") {
  const auto ranked = RankedPairList::from_pairs(
      {ps("Q2", "R1", 0.5), ps("Q1", "R2", 0.5), ps("Q1", "R1", 0.5), ps("Q3", "R1", 0.9)});
  REQUIRE(ranked.size() == 4);
  CHECK(ranked.pairs()[0].query.str() == "Q3");
  CHECK(ranked.pairs()[1].query.str() == "Q1");
  CHECK(ranked.pairs()[1].reference.str() == "R1");
  CHECK(ranked.pairs()[2].query.str() == "Q1");
  CHECK(ranked.pairs()[2].reference.str() == "R2");
  CHECK(ranked.pairs()[3].query.str() == "Q2");

  CHECK_THROWS_AS(RankedPairList::from_pairs({ps("Q1", "R1", 0.5), ps("Q1", "R1", 0.4)}),
                  DomainError);
  CHECK_THROWS_AS(
      RankedPairList::from_pairs({ps("Q1", "R1", std::numeric_limits<double>::quiet_NaN())}),
      DomainError);
}

TEST_CASE("zero total positives is rejected everywhere") {
  const auto ranked = RankedPairList::from_pairs({ps("Q1", "R1", 0.5)});
  GroundTruth empty;
  CHECK_THROWS_AS(micro_ap(ranked, empty), DomainError);
  CHECK_THROWS_AS(recall_at_precision(ranked, empty, 0.9), DomainError);
  CHECK_THROWS_AS(pr_curve(ranked, empty), DomainError);
}

TEST_CASE("ground truth total override") {
  const GroundTruth gt = gt_of({{"Q1", "R1"}}, 5);
  CHECK(gt.total_positives == 5);
  CHECK_THROWS_AS(gt_of({{"Q1", "R1"}, {"Q2", "R2"}}, 1), DomainError);
  // Duplicate positive rows collapse into the set.
  const GroundTruth dup = gt_of({{"Q1", "R1"}, {"Q1", "R1"}});
  CHECK(dup.total_positives == 1);
}

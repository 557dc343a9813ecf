#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sdae/masking.hpp"

using namespace sdae;

namespace {

// Brute-force oracle on plain sets, independent of validate().
bool oracle_partition_ok(const MaskPlan& plan) {
  std::set<std::size_t> visible(plan.visible_idx.begin(),
                                plan.visible_idx.end());
  std::set<std::size_t> masked(plan.masked_idx.begin(), plan.masked_idx.end());
  if (visible.size() != plan.visible_idx.size()) return false;
  if (masked.size() != plan.masked_idx.size()) return false;
  for (std::size_t i : masked)
    if (visible.count(i)) return false;
  if (visible.size() + masked.size() != plan.n_tokens) return false;
  for (std::size_t i = 0; i < plan.n_tokens; ++i)
    if (!visible.count(i) && !masked.count(i)) return false;

  std::set<std::size_t> fold_union;
  std::size_t mn = SIZE_MAX, mx = 0;
  for (const auto& fold : plan.folds) {
    mn = std::min(mn, fold.size());
    mx = std::max(mx, fold.size());
    for (std::size_t i : fold) {
      if (!masked.count(i)) return false;        // must be masked
      if (!fold_union.insert(i).second) return false;  // no overlap
    }
  }
  if (fold_union != masked) return false;  // exact cover
  return mx <= mn + 1;                     // balance
}

}  // namespace

TEST_CASE("mask counts") {
  CHECK(masked_count(196, 0.75) == 147);
  CHECK(masked_count(64, 0.75) == 48);
  CHECK(masked_count(10, 0.25) == 3);  // ties round up: 2.5 -> 3
  CHECK_THROWS_AS(masked_count(10, 0.0), ConfigError);
  CHECK_THROWS_AS(masked_count(10, 1.0), ConfigError);
  CHECK_THROWS_AS(masked_count(10, 0.01), ConfigError);  // rounds to 0
  CHECK_THROWS_AS(masked_count(1, 0.5), ConfigError);
}

TEST_CASE("paper-recipe split: 196 tokens at r=0.75") {
  const MaskPlan plan = sample_mask(196, 0.75, 123);
  CHECK(plan.masked_idx.size() == 147);
  CHECK(plan.visible_idx.size() == 49);
  CHECK(validate(plan).empty());
}

TEST_CASE("same seed, same plan") {
  const MaskPlan a = sample_mask(64, 0.75, 7);
  const MaskPlan b = sample_mask(64, 0.75, 7);
  CHECK(a.masked_idx == b.masked_idx);
  CHECK(a.visible_idx == b.visible_idx);
  const MaskPlan c = sample_mask(64, 0.75, 8);
  CHECK(a.masked_idx != c.masked_idx);
}

TEST_CASE("each index masked with the right frequency") {
  const std::size_t n = 16, draws = 10000;
  std::vector<std::size_t> hits(n, 0);
  for (std::size_t d = 0; d < draws; ++d) {
    const MaskPlan plan = sample_mask(n, 0.5, 1000 + d);
    for (std::size_t i : plan.masked_idx) ++hits[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double freq = static_cast<double>(hits[i]) / draws;
    CHECK(freq == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +/- 0.02
  }
}

TEST_CASE("fold partition shapes") {
  MaskPlan plan = sample_mask(196, 0.75, 5);
  partition_folds(plan, 3, 99);
  REQUIRE(plan.folds.size() == 3);
  for (const auto& f : plan.folds) CHECK(f.size() == 49);

  MaskPlan small = sample_mask(20, 0.5, 5);  // 10 masked
  partition_folds(small, 3, 99);
  std::multiset<std::size_t> sizes;
  for (const auto& f : small.folds) sizes.insert(f.size());
  CHECK(sizes == std::multiset<std::size_t>{3, 3, 4});

  MaskPlan one = sample_mask(20, 0.5, 5);
  partition_folds(one, 1, 99);
  REQUIRE(one.folds.size() == 1);
  CHECK(one.folds[0] == one.masked_idx);

  CHECK_THROWS_AS(partition_folds(small, 11, 1), ConfigError);
  CHECK_THROWS_AS(partition_folds(small, 0, 1), ConfigError);
}

TEST_CASE("partition property against the brute-force oracle") {
  for (std::size_t n = 8; n <= 256; ++n) {
    for (const double r : {0.25, 0.5, 0.75}) {
      const std::size_t m = masked_count(n, r);
      for (std::size_t t = 1; t <= 6 && t <= m; ++t) {
        MaskPlan plan = sample_mask(n, r, n * 31 + t);
        partition_folds(plan, t, n * 17 + t);
        REQUIRE(oracle_partition_ok(plan));
        REQUIRE(validate(plan).empty());
      }
    }
  }
}

TEST_CASE("fold-balance operating point: fold size equals visible size") {
  // r = 1 - 1/(t+1) with N divisible by t+1.
  for (const auto& [n, t] : std::vector<std::pair<std::size_t, std::size_t>>{
           {64, 3}, {196, 3}, {60, 2}, {100, 4}}) {
    const double r = 1.0 - 1.0 / static_cast<double>(t + 1);
    MaskPlan plan = sample_mask(n, r, 3);
    partition_folds(plan, t, 4);
    for (const auto& fold : plan.folds)
      CHECK(fold.size() == plan.visible_idx.size());
  }
}

TEST_CASE("teacher crop keeps round(m*(1-r_c)) targets") {
  MaskPlan plan = sample_mask(196, 0.75, 11);  // 147 masked
  teacher_crop(plan, 0.755, 12);
  CHECK(plan.retained_idx.size() == 36);  // the 36-patch sweep point
  for (std::size_t i : plan.retained_idx)
    CHECK(std::binary_search(plan.masked_idx.begin(), plan.masked_idx.end(),
                             i));

  MaskPlan all = sample_mask(196, 0.75, 11);
  teacher_crop(all, 1e-9, 12);  // r_c -> 0 keeps every masked token
  CHECK(all.retained_idx == all.masked_idx);

  MaskPlan none = sample_mask(196, 0.75, 11);
  CHECK_THROWS_AS(teacher_crop(none, 0.9999, 12), ConfigError);
  CHECK_THROWS_AS(teacher_crop(none, 1.5, 12), ConfigError);
}

TEST_CASE("complexity formulas match the published table") {
  const auto full = complexity_estimate(FeedingMode::full_image, 196, 768,
                                        0.75, 0.5, 3);
  CHECK(full.cost == 29503488.0);  // 196^2 * 768
  CHECK(full.ratio_vs_full == 1.0);

  const auto only = complexity_estimate(FeedingMode::only_masked, 196, 768,
                                        0.75, 0.5, 3);
  CHECK(only.cost == doctest::Approx(196.0 * 196 * 0.75 * 0.75 * 768));

  const auto multi = complexity_estimate(FeedingMode::multi_fold, 196, 768,
                                         0.75, 0.5, 3);
  CHECK(multi.cost ==
        doctest::Approx(only.cost / 3.0).epsilon(1e-12));

  // t = 1 coincides with only_masked.
  const auto multi1 = complexity_estimate(FeedingMode::multi_fold, 196, 768,
                                          0.75, 0.5, 1);
  CHECK(multi1.cost == doctest::Approx(only.cost).epsilon(1e-12));

  // Both r_c readings are exposed.
  const auto crop_ret = complexity_estimate(FeedingMode::teacher_crop, 196,
                                            768, 0.75, 0.3, 3,
                                            CropReading::retained);
  const auto crop_lit = complexity_estimate(FeedingMode::teacher_crop, 196,
                                            768, 0.75, 0.3, 3,
                                            CropReading::literal);
  CHECK(crop_ret.cost ==
        doctest::Approx(196.0 * 196 * 0.7 * 0.7 * 0.75 * 0.75 * 768));
  CHECK(crop_lit.cost ==
        doctest::Approx(196.0 * 196 * 0.3 * 0.3 * 0.75 * 0.75 * 768));

  CHECK_THROWS_AS(
      complexity_estimate(FeedingMode::only_masked, 196, 768, 1.5, 0.5, 3),
      ConfigError);
}

TEST_CASE("multi_fold = only_masked / t over a parameter grid") {
  std::size_t points = 0;
  for (const double n : {16.0, 64.0, 196.0, 256.0, 1024.0})
    for (const double d : {48.0, 768.0})
      for (const double r : {0.25, 0.5, 0.6, 0.75, 0.9})
        for (const double t : {1.0, 2.0, 3.0, 4.0}) {
          const auto om =
              complexity_estimate(FeedingMode::only_masked, n, d, r, 0.5, t);
          const auto mf =
              complexity_estimate(FeedingMode::multi_fold, n, d, r, 0.5, t);
          REQUIRE(std::abs(mf.cost - om.cost / t) <= 1e-12 * om.cost);
          ++points;
        }
  CHECK(points == 200);
}

TEST_CASE("validate flags constructed violations") {
  MaskPlan plan = sample_mask(196, 0.75, 21);
  partition_folds(plan, 3, 22);
  CHECK(validate(plan).empty());

  SUBCASE("fold overlaps the visible set") {
    MaskPlan bad = plan;
    bad.folds[0][0] = bad.visible_idx[0];
    const auto v = validate(bad);
    bool found = false;
    for (const auto& msg : v) found |= msg == "fold-visible overlap";
    CHECK(found);
  }
  SUBCASE("imbalanced folds 50/49/48") {
    MaskPlan bad = plan;
    bad.folds[0].push_back(bad.folds[2].back());
    bad.folds[2].pop_back();
    std::sort(bad.folds[0].begin(), bad.folds[0].end());
    REQUIRE(bad.folds[0].size() == 50);
    REQUIRE(bad.folds[2].size() == 48);
    const auto v = validate(bad);
    bool found = false;
    for (const auto& msg : v) found |= msg == "imbalance > 1";
    CHECK(found);
  }
  SUBCASE("retained set escapes the masked set") {
    MaskPlan bad = plan;
    bad.retained_idx = {bad.visible_idx[0]};
    const auto v = validate(bad);
    CHECK(!v.empty());
  }
}

TEST_CASE("ascii grid renders folds") {
  MaskPlan plan = make_plan(64, 0.75, FeedingMode::multi_fold, 3, 0.0, 7);
  const std::string grid = ascii_grid(plan);
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 8);
  CHECK(grid.find('0') != std::string::npos);
  CHECK(grid.find('2') != std::string::npos);
  CHECK_THROWS_AS(ascii_grid(sample_mask(10, 0.5, 1)), ConfigError);
}

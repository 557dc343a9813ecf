#include "sdae/masking.hpp"

#include <algorithm>
#include <cmath>

#include "sdae/rng.hpp"

namespace sdae {

const char* to_string(FeedingMode mode) {
  switch (mode) {
    case FeedingMode::full_image: return "full_image";
    case FeedingMode::only_masked: return "only_masked";
    case FeedingMode::teacher_crop: return "teacher_crop";
    case FeedingMode::multi_fold: return "multi_fold";
  }
  return "?";
}

FeedingMode feeding_mode_from_string(const std::string& s) {
  if (s == "full_image") return FeedingMode::full_image;
  if (s == "only_masked") return FeedingMode::only_masked;
  if (s == "teacher_crop") return FeedingMode::teacher_crop;
  if (s == "multi_fold") return FeedingMode::multi_fold;
  throw ConfigError("unknown feeding mode '" + s + "'");
}

std::size_t masked_count(std::size_t n_tokens, double mask_ratio) {
  if (n_tokens < 2)
    throw ConfigError("mask: need at least 2 tokens, got " +
                      std::to_string(n_tokens));
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    throw ConfigError("mask: ratio must lie in (0,1), got " +
                      std::to_string(mask_ratio));
  const auto m = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_tokens) * mask_ratio + 0.5));
  if (m < 1)
    throw ConfigError("mask: ratio leaves no masked token (no target)");
  if (m > n_tokens - 1)
    throw ConfigError("mask: ratio leaves no visible token (no input)");
  return m;
}

MaskPlan sample_mask(std::size_t n_tokens, double mask_ratio,
                     std::uint64_t seed) {
  const std::size_t m = masked_count(n_tokens, mask_ratio);
  std::vector<std::size_t> perm(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) perm[i] = i;
  Rng rng(Rng::derive(seed, {0x6d61736bULL}));
  rng.shuffle(perm);

  MaskPlan plan;
  plan.n_tokens = n_tokens;
  plan.mask_ratio = mask_ratio;
  plan.seed = seed;
  plan.masked_idx.assign(perm.begin(), perm.begin() + m);
  plan.visible_idx.assign(perm.begin() + m, perm.end());
  std::sort(plan.masked_idx.begin(), plan.masked_idx.end());
  std::sort(plan.visible_idx.begin(), plan.visible_idx.end());
  return plan;
}

void partition_folds(MaskPlan& plan, std::size_t t, std::uint64_t seed) {
  const std::size_t m = plan.masked_idx.size();
  if (t < 1 || t > m)
    throw ConfigError("folds: fold count " + std::to_string(t) +
                      " not in [1, " + std::to_string(m) + "]");
  std::vector<std::size_t> shuffled = plan.masked_idx;
  Rng rng(Rng::derive(seed, {0x666f6c64ULL}));
  rng.shuffle(shuffled);

  plan.folds.assign(t, {});
  const std::size_t base = m / t;
  const std::size_t extra = m % t;
  std::size_t off = 0;
  for (std::size_t f = 0; f < t; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    plan.folds[f].assign(shuffled.begin() + off, shuffled.begin() + off + len);
    std::sort(plan.folds[f].begin(), plan.folds[f].end());
    off += len;
  }
}

void teacher_crop(MaskPlan& plan, double crop_ratio, std::uint64_t seed) {
  if (!(crop_ratio > 0.0 && crop_ratio < 1.0))
    throw ConfigError("teacher_crop: ratio must lie in (0,1), got " +
                      std::to_string(crop_ratio));
  const std::size_t m = plan.masked_idx.size();
  const auto keep = static_cast<std::size_t>(
      std::floor(static_cast<double>(m) * (1.0 - crop_ratio) + 0.5));
  if (keep < 1)
    throw ConfigError("teacher_crop: ratio retains no target token");
  std::vector<std::size_t> shuffled = plan.masked_idx;
  Rng rng(Rng::derive(seed, {0x63726f70ULL}));
  rng.shuffle(shuffled);
  plan.retained_idx.assign(shuffled.begin(), shuffled.begin() + keep);
  std::sort(plan.retained_idx.begin(), plan.retained_idx.end());
  plan.crop_ratio = crop_ratio;
}

MaskPlan make_plan(std::size_t n_tokens, double mask_ratio, FeedingMode mode,
                   std::size_t t, double crop_ratio, std::uint64_t seed) {
  MaskPlan plan = sample_mask(n_tokens, mask_ratio, seed);
  plan.feeding_mode = mode;
  if (mode == FeedingMode::multi_fold)
    partition_folds(plan, t, Rng::derive(seed, {1}));
  else if (mode == FeedingMode::teacher_crop)
    teacher_crop(plan, crop_ratio, Rng::derive(seed, {2}));
  return plan;
}

std::vector<std::string> validate(const MaskPlan& plan) {
  std::vector<std::string> bad;
  const std::size_t n = plan.n_tokens;

  auto sorted_unique = [](const std::vector<std::size_t>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i - 1] >= v[i]) return false;
    return true;
  };

  if (!sorted_unique(plan.visible_idx) || !sorted_unique(plan.masked_idx)) {
    bad.push_back("index lists not sorted/unique");
    return bad;
  }

  std::vector<std::size_t> all = plan.visible_idx;
  all.insert(all.end(), plan.masked_idx.begin(), plan.masked_idx.end());
  std::sort(all.begin(), all.end());
  bool covers = all.size() == n;
  for (std::size_t i = 0; covers && i < all.size(); ++i) covers = all[i] == i;
  if (!covers) bad.push_back("visible/masked do not partition the token set");

  if (n >= 2 && plan.mask_ratio > 0.0 && plan.mask_ratio < 1.0) {
    const auto want = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * plan.mask_ratio + 0.5));
    if (plan.masked_idx.size() != want)
      bad.push_back("masked count != round(N*r)");
  }

  if (!plan.folds.empty()) {
    std::vector<std::size_t> fold_union;
    std::size_t min_sz = SIZE_MAX, max_sz = 0;
    bool overlap_visible = false;
    for (const auto& fold : plan.folds) {
      min_sz = std::min(min_sz, fold.size());
      max_sz = std::max(max_sz, fold.size());
      fold_union.insert(fold_union.end(), fold.begin(), fold.end());
      for (std::size_t i : fold)
        overlap_visible |= std::binary_search(plan.visible_idx.begin(),
                                              plan.visible_idx.end(), i);
    }
    if (overlap_visible) bad.push_back("fold-visible overlap");
    std::sort(fold_union.begin(), fold_union.end());
    if (std::adjacent_find(fold_union.begin(), fold_union.end()) !=
        fold_union.end())
      bad.push_back("folds overlap each other");
    else if (fold_union != plan.masked_idx)
      bad.push_back("folds do not cover the masked set exactly");
    if (max_sz > min_sz + 1) bad.push_back("imbalance > 1");
  }

  if (!plan.retained_idx.empty()) {
    for (std::size_t i : plan.retained_idx)
      if (!std::binary_search(plan.masked_idx.begin(), plan.masked_idx.end(),
                              i)) {
        bad.push_back("retained set not a subset of the masked set");
        break;
      }
  }
  return bad;
}

ComplexityEstimate complexity_estimate(FeedingMode mode, double n, double d,
                                       double r, double r_c, double t,
                                       CropReading reading) {
  if (n < 1.0 || d < 1.0)
    throw ConfigError("complexity: n and d must be >= 1");
  const double full = n * n * d;
  double cost = 0.0;
  switch (mode) {
    case FeedingMode::full_image:
      cost = full;
      break;
    case FeedingMode::only_masked:
      if (!(r > 0.0 && r < 1.0))
        throw ConfigError("complexity: r must lie in (0,1)");
      cost = n * n * r * r * d;
      break;
    case FeedingMode::teacher_crop: {
      if (!(r > 0.0 && r < 1.0))
        throw ConfigError("complexity: r must lie in (0,1)");
      if (!(r_c > 0.0 && r_c < 1.0))
        throw ConfigError("complexity: r_c must lie in (0,1)");
      const double f = reading == CropReading::retained ? 1.0 - r_c : r_c;
      cost = n * n * f * f * r * r * d;
      break;
    }
    case FeedingMode::multi_fold:
      if (!(r > 0.0 && r < 1.0))
        throw ConfigError("complexity: r must lie in (0,1)");
      if (t < 1.0) throw ConfigError("complexity: t must be >= 1");
      cost = (n / t) * (n / t) * t * r * r * d;
      break;
  }
  return {cost, cost / full};
}

std::string ascii_grid(const MaskPlan& plan) {
  const auto side = static_cast<std::size_t>(
      std::llround(std::sqrt(static_cast<double>(plan.n_tokens))));
  if (side * side != plan.n_tokens)
    throw ConfigError("ascii_grid: token count " +
                      std::to_string(plan.n_tokens) + " is not a square grid");
  std::string cells(plan.n_tokens, '.');
  for (std::size_t i : plan.masked_idx) cells[i] = '#';
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const char c = f < 10 ? static_cast<char>('0' + f)
                          : static_cast<char>('a' + (f - 10));
    for (std::size_t i : plan.folds[f]) cells[i] = c;
  }
  std::string out;
  for (std::size_t row = 0; row < side; ++row) {
    for (std::size_t col = 0; col < side; ++col) {
      out += cells[row * side + col];
      out += col + 1 == side ? '\n' : ' ';
    }
  }
  return out;
}

}  // namespace sdae

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdae/common.hpp"

namespace sdae {

// How the teacher branch is fed.
enum class FeedingMode { full_image, only_masked, teacher_crop, multi_fold };

const char* to_string(FeedingMode mode);
FeedingMode feeding_mode_from_string(const std::string& s);

// Partition of the token index range into a visible set, a masked set, and
// optionally t disjoint teacher folds or a retained teacher-crop subset.
// Index lists are sorted ascending.
struct MaskPlan {
  std::size_t n_tokens = 0;
  double mask_ratio = 0.0;
  std::vector<std::size_t> visible_idx;
  std::vector<std::size_t> masked_idx;
  std::vector<std::vector<std::size_t>> folds;   // multi_fold
  std::vector<std::size_t> retained_idx;         // teacher_crop
  FeedingMode feeding_mode = FeedingMode::only_masked;
  double crop_ratio = 0.0;  // fraction of masked tokens cropped away
  std::uint64_t seed = 0;
};

// round(n*r), ties up. Throws ConfigError when the count degenerates to
// 0 or n (no reconstruction target / no student input).
std::size_t masked_count(std::size_t n_tokens, double mask_ratio);

// Uniformly random masked subset of size round(n*r).
MaskPlan sample_mask(std::size_t n_tokens, double mask_ratio,
                     std::uint64_t seed);

// Random balanced partition of masked_idx into t folds (sizes differ by at
// most one, zero overlap with the visible set by construction).
void partition_folds(MaskPlan& plan, std::size_t t, std::uint64_t seed);

// Keeps round(|masked| * (1 - crop_ratio)) masked tokens as teacher targets;
// crop_ratio is the fraction cropped away.
void teacher_crop(MaskPlan& plan, double crop_ratio, std::uint64_t seed);

// Full plan construction for a feeding mode; sub-seeds are derived from the
// plan seed.
MaskPlan make_plan(std::size_t n_tokens, double mask_ratio, FeedingMode mode,
                   std::size_t t, double crop_ratio, std::uint64_t seed);

// Checks every MaskPlan invariant; returns human-readable violations
// (empty means the plan is well formed). Never throws.
std::vector<std::string> validate(const MaskPlan& plan);

// Which fraction Table-style teacher-crop cost formulas square: the retained
// fraction (1 - r_c), or r_c taken literally as printed.
enum class CropReading { retained, literal };

struct ComplexityEstimate {
  double cost = 0.0;
  double ratio_vs_full = 0.0;
};

// Attention-cost estimates, literal formula evaluation with no hidden
// constants:
//   full_image    n^2 d
//   only_masked   n^2 r^2 d
//   teacher_crop  n^2 rc'^2 r^2 d   (rc' per CropReading)
//   multi_fold    (n/t)^2 t r^2 d
ComplexityEstimate complexity_estimate(FeedingMode mode, double n, double d,
                                       double r, double r_c, double t,
                                       CropReading reading = CropReading::retained);

// Renders the plan over a square token grid: '.' for visible tokens, fold
// number (or '#') for masked ones.
std::string ascii_grid(const MaskPlan& plan);

}  // namespace sdae

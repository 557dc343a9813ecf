#pragma once

#include "sdae/data.hpp"
#include "sdae/distill.hpp"
#include "sdae/vit.hpp"

namespace sdae {

enum class FeatureSource { mean_pool_patches, class_token };
FeatureSource feature_source_from_string(const std::string& s);
const char* to_string(FeatureSource f);

struct ProbeConfig {
  FeatureSource feature = FeatureSource::mean_pool_patches;
  std::size_t probe_epochs = 40;
  double probe_lr = 0.01;
  std::size_t probe_batch = 128;
  std::uint64_t seed = 7;
};

// Frozen features, one row per image: full token sequence through the
// encoder (no masking, no augmentation), then mean-pooled patch tokens or
// the class token.
Tensor extract_features(const VitConfig& cfg, const EncoderParamsT<float>& enc,
                        const Tensor& enc_pos, const Dataset& ds,
                        FeatureSource source);

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t n_eval = 0;
};

// Softmax regression on fixed feature matrices; top-1 on the eval set.
ProbeResult probe_features(const Tensor& train_x,
                           const std::vector<std::uint16_t>& train_y,
                           const Tensor& eval_x,
                           const std::vector<std::uint16_t>& eval_y,
                           std::size_t class_count, const ProbeConfig& cfg);

// Trains only the affine classifier; the encoder is never recorded on a
// tape, so its parameters stay bitwise untouched.
ProbeResult linear_probe(const VitConfig& cfg,
                         const EncoderParamsT<float>& enc,
                         const Tensor& enc_pos, const Dataset& train,
                         const Dataset& eval, const ProbeConfig& probe);

struct BranchComparison {
  double student_acc = 0.0;
  double teacher_acc = 0.0;
  double random_acc = 0.0;  // random-init encoder baseline
  double gap = 0.0;         // |student - teacher|
};

// Identical probe protocol on the student encoder, the EMA teacher, and a
// freshly initialized baseline encoder.
BranchComparison compare_branches(VitState& student, TeacherState& teacher,
                                  const Dataset& train, const Dataset& eval,
                                  const ProbeConfig& probe);

// Desk-scale fine-tuning smoke: unfreezes the encoder, trains encoder +
// classifier jointly at a low learning rate, reports eval top-1.
double fine_tune(const VitState& pretrained, const Dataset& train,
                 const Dataset& eval, std::size_t epochs, double lr,
                 const ProbeConfig& probe);

}  // namespace sdae

#pragma once

#include "sdae/masking.hpp"
#include "sdae/params.hpp"
#include "sdae/vit.hpp"

namespace sdae {

// Gradient-free shadow of the student encoder, updated only through
// ema_update. Tensors carry requires_grad = false and the forward runs with
// recording suppressed, so no training step can touch it.
template <typename S>
struct TeacherStateT {
  EncoderParamsT<S> params;
  bool use_class_token = true;
};

using TeacherState = TeacherStateT<float>;

template <typename S>
TeacherStateT<S> make_teacher(const VitStateT<S>& student);

// Same canonical names as the student encoder subset.
template <typename S>
NamedParamsT<S> teacher_named_params(TeacherStateT<S>& teacher);

// phi <- eta * phi + (1 - eta) * theta, elementwise. eta = 1 is a no-op and
// eta = 0 copies the student; configs reject the boundaries, the op allows
// them.
template <typename S>
void ema_update(NamedParamsT<S> phi, const NamedParamsT<S>& theta, double eta);
template <typename S>
void ema_update(TeacherStateT<S>& teacher, VitStateT<S>& student, double eta);

struct MomentumSchedule {
  double eta_start = 0.96;
  double eta_end = 0.99;
  std::size_t total_epochs = 1;
};

// Cosine ramp: eta(0) = start, eta(total) = end, both exact. Epochs past
// the end clamp with a warning on stderr.
double eta_schedule(const MomentumSchedule& sched, double epoch);
double eta_schedule(double epoch, std::size_t total_epochs);

// Per-patch standardization of teacher outputs over the feature dimension
// (population variance). Pure; never recorded.
template <typename S>
TensorT<S> normalize_targets(const TensorT<S>& features, S eps);

template <typename S>
struct TeacherTargetsT {
  TensorT<S> features;                  // |target_idx| x embed_dim
  std::vector<std::size_t> target_idx;  // global patch indices, sorted
};

using TeacherTargets = TeacherTargetsT<float>;

// Runs the teacher per the plan's feeding mode and rearranges outputs into
// masked-index order (teacher_crop keeps only the retained subset). Every
// fold forward uses the same weights; nothing is recorded on any tape.
template <typename S>
TeacherTargetsT<S> teacher_forward_folds(const VitConfig& cfg,
                                         const TeacherStateT<S>& teacher,
                                         const TensorT<S>& enc_pos,
                                         const TensorT<S>& tokens,
                                         const MaskPlan& plan);

}  // namespace sdae

#include "sdae/distill.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "sdae/ops.hpp"

namespace sdae {

template <typename S>
TeacherStateT<S> make_teacher(const VitStateT<S>& student) {
  TeacherStateT<S> t;
  t.use_class_token = student.config.use_class_token;
  t.params.blocks.resize(student.encoder.blocks.size());
  t.params.patch_weight = student.encoder.patch_weight.clone();
  t.params.patch_bias = student.encoder.patch_bias.clone();
  if (t.use_class_token)
    t.params.class_token = student.encoder.class_token.clone();
  for (std::size_t i = 0; i < t.params.blocks.size(); ++i) {
    const auto& f = student.encoder.blocks[i];
    auto& b = t.params.blocks[i];
    b.norm1_gain = f.norm1_gain.clone();
    b.norm1_bias = f.norm1_bias.clone();
    b.qkv_weight = f.qkv_weight.clone();
    b.qkv_bias = f.qkv_bias.clone();
    b.proj_weight = f.proj_weight.clone();
    b.proj_bias = f.proj_bias.clone();
    b.norm2_gain = f.norm2_gain.clone();
    b.norm2_bias = f.norm2_bias.clone();
    b.fc1_weight = f.fc1_weight.clone();
    b.fc1_bias = f.fc1_bias.clone();
    b.fc2_weight = f.fc2_weight.clone();
    b.fc2_bias = f.fc2_bias.clone();
  }
  t.params.norm_gain = student.encoder.norm_gain.clone();
  t.params.norm_bias = student.encoder.norm_bias.clone();

  for (auto& [name, tensor] : teacher_named_params(t))
    tensor.set_requires_grad(false);
  return t;
}

template <typename S>
NamedParamsT<S> teacher_named_params(TeacherStateT<S>& teacher) {
  NamedParamsT<S> out;
  collect_encoder_params(teacher.params, teacher.use_class_token, out);
  return out;
}

template <typename S>
void ema_update(NamedParamsT<S> phi, const NamedParamsT<S>& theta,
                double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw ContractError("ema: eta " + std::to_string(eta) +
                        " outside [0, 1]");
  if (phi.size() != theta.size())
    throw ContractError("ema: parameter count mismatch (" +
                        std::to_string(phi.size()) + " vs " +
                        std::to_string(theta.size()) + ")");
  const S e = static_cast<S>(eta);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    auto& [pname, p] = phi[i];
    const auto& [tname, t] = theta[i];
    if (pname != tname || p.shape() != t.shape())
      throw ContractError("ema: mismatch at '" + pname + "' (" +
                          shape_str(p.shape()) + ") vs '" + tname + "' (" +
                          shape_str(t.shape()) + ")");
    S* pv = p.ptr();
    const S* tv = t.ptr();
    for (std::size_t j = 0; j < p.size(); ++j)
      pv[j] = e * pv[j] + (S(1) - e) * tv[j];
  }
}

template <typename S>
void ema_update(TeacherStateT<S>& teacher, VitStateT<S>& student, double eta) {
  NamedParamsT<S> theta;
  collect_encoder_params(student.encoder, student.config.use_class_token,
                         theta);
  ema_update(teacher_named_params(teacher), theta, eta);
}

double eta_schedule(const MomentumSchedule& sched, double epoch) {
  if (epoch < 0.0)
    throw ContractError("eta_schedule: negative epoch");
  const auto total = static_cast<double>(sched.total_epochs);
  if (total <= 0.0) return sched.eta_end;
  if (epoch > total) {
    std::cerr << "eta_schedule: epoch " << epoch << " past total " << total
              << ", clamping\n";
    epoch = total;
  }
  const double pi = 3.14159265358979323846;
  return sched.eta_end -
         (sched.eta_end - sched.eta_start) *
             (1.0 + std::cos(pi * epoch / total)) / 2.0;
}

double eta_schedule(double epoch, std::size_t total_epochs) {
  return eta_schedule(MomentumSchedule{0.96, 0.99, total_epochs}, epoch);
}

template <typename S>
TensorT<S> normalize_targets(const TensorT<S>& features, S eps) {
  if (features.ndim() != 2)
    throw ShapeError("normalize_targets: expected a matrix, got " +
                     shape_str(features.shape()));
  if (features.cols() < 2)
    throw ContractError("normalize_targets: feature dim must be >= 2");
  if (!(eps > S(0)))
    throw ContractError("normalize_targets: eps must be > 0");
  const std::size_t r = features.rows(), d = features.cols();
  auto out = TensorT<S>::zeros(features.shape());
  const S* src = features.ptr();
  S* dst = out.ptr();
  for (std::size_t i = 0; i < r; ++i) {
    const S* row = src + i * d;
    S mean = S(0);
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (std::size_t j = 0; j < d; ++j) {
      const S x = row[j] - mean;
      var += x * x;
    }
    var /= static_cast<S>(d);
    const S inv = S(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) dst[i * d + j] = (row[j] - mean) * inv;
  }
  return out;
}

template <typename S>
TeacherTargetsT<S> teacher_forward_folds(const VitConfig& cfg,
                                         const TeacherStateT<S>& teacher,
                                         const TensorT<S>& enc_pos,
                                         const TensorT<S>& tokens,
                                         const MaskPlan& plan) {
  {
    const auto violations = validate(plan);
    if (!violations.empty())
      throw ContractError("teacher: invalid mask plan: " + violations.front());
  }
  if (tokens.ndim() != 2 || tokens.rows() != plan.n_tokens)
    throw ContractError("teacher: token matrix " + shape_str(tokens.shape()) +
                        " does not cover the plan's " +
                        std::to_string(plan.n_tokens) + " tokens");
  if (plan.feeding_mode == FeedingMode::multi_fold && plan.folds.empty())
    throw ContractError("teacher: multi_fold plan without folds");
  if (plan.feeding_mode == FeedingMode::teacher_crop &&
      plan.retained_idx.empty())
    throw ContractError("teacher: teacher_crop plan without a retained set");

  NoTapeScopeT<S> no_tape;
  const std::size_t cls = teacher.use_class_token ? 1 : 0;
  const std::size_t d = cfg.embed_dim;

  auto run_subset =
      [&](const std::vector<std::size_t>& positions) -> TensorT<S> {
    TensorT<S> subset = ops::select_rows(tokens, positions);
    return encoder_forward(cfg, teacher.params, enc_pos, subset, positions);
  };

  TeacherTargetsT<S> out;
  switch (plan.feeding_mode) {
    case FeedingMode::full_image: {
      std::vector<std::size_t> all(plan.n_tokens);
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      TensorT<S> latents = run_subset(all);
      out.features = TensorT<S>::zeros({plan.masked_idx.size(), d});
      for (std::size_t j = 0; j < plan.masked_idx.size(); ++j)
        std::copy_n(latents.ptr() + (cls + plan.masked_idx[j]) * d, d,
                    out.features.ptr() + j * d);
      out.target_idx = plan.masked_idx;
      break;
    }
    case FeedingMode::only_masked: {
      TensorT<S> latents = run_subset(plan.masked_idx);
      out.features = TensorT<S>::zeros({plan.masked_idx.size(), d});
      std::copy_n(latents.ptr() + cls * d, plan.masked_idx.size() * d,
                  out.features.ptr());
      out.target_idx = plan.masked_idx;
      break;
    }
    case FeedingMode::teacher_crop: {
      TensorT<S> latents = run_subset(plan.retained_idx);
      out.features = TensorT<S>::zeros({plan.retained_idx.size(), d});
      std::copy_n(latents.ptr() + cls * d, plan.retained_idx.size() * d,
                  out.features.ptr());
      out.target_idx = plan.retained_idx;
      break;
    }
    case FeedingMode::multi_fold: {
      out.features = TensorT<S>::zeros({plan.masked_idx.size(), d});
      for (const auto& fold : plan.folds) {
        TensorT<S> latents = run_subset(fold);
        for (std::size_t j = 0; j < fold.size(); ++j) {
          const auto it = std::lower_bound(plan.masked_idx.begin(),
                                           plan.masked_idx.end(), fold[j]);
          const auto rank =
              static_cast<std::size_t>(it - plan.masked_idx.begin());
          std::copy_n(latents.ptr() + (cls + j) * d, d,
                      out.features.ptr() + rank * d);
        }
      }
      out.target_idx = plan.masked_idx;
      break;
    }
  }
  return out;
}

#define SDAE_INSTANTIATE_DISTILL(S)                                         \
  template TeacherStateT<S> make_teacher<S>(const VitStateT<S>&);           \
  template NamedParamsT<S> teacher_named_params<S>(TeacherStateT<S>&);      \
  template void ema_update<S>(NamedParamsT<S>, const NamedParamsT<S>&,      \
                              double);                                      \
  template void ema_update<S>(TeacherStateT<S>&, VitStateT<S>&, double);    \
  template TensorT<S> normalize_targets<S>(const TensorT<S>&, S);           \
  template TeacherTargetsT<S> teacher_forward_folds<S>(                     \
      const VitConfig&, const TeacherStateT<S>&, const TensorT<S>&,         \
      const TensorT<S>&, const MaskPlan&);

SDAE_INSTANTIATE_DISTILL(float)
SDAE_INSTANTIATE_DISTILL(double)

}  // namespace sdae

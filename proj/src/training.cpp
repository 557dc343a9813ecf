#include "sdae/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <ostream>

#include "sdae/checkpoint.hpp"
#include "sdae/kernels.hpp"
#include "sdae/ops.hpp"
#include "sdae/rng.hpp"

namespace sdae {

const char* to_string(EmaMode m) {
  return m == EmaMode::per_epoch ? "per_epoch" : "per_iteration";
}
const char* to_string(LossForm f) {
  return f == LossForm::per_token ? "per_token" : "global";
}
const char* to_string(FoldResample f) {
  return f == FoldResample::per_step ? "per_step" : "fixed";
}

EmaMode ema_mode_from_string(const std::string& s) {
  if (s == "per_epoch") return EmaMode::per_epoch;
  if (s == "per_iteration") return EmaMode::per_iteration;
  throw ConfigError("unknown ema mode '" + s + "'");
}

LossForm loss_form_from_string(const std::string& s) {
  if (s == "per_token") return LossForm::per_token;
  if (s == "global") return LossForm::global;
  throw ConfigError("unknown loss form '" + s + "'");
}

FoldResample fold_resample_from_string(const std::string& s) {
  if (s == "per_step") return FoldResample::per_step;
  if (s == "fixed") return FoldResample::fixed;
  throw ConfigError("unknown fold resample mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (warmup_epochs >= epochs)
    throw ConfigError("train: warmup_epochs must be < epochs");
  if (base_lr <= 0.0) throw ConfigError("train: base_lr must be > 0");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("train: r must lie in (0,1)");
  if (feeding_mode == FeedingMode::multi_fold && t == 0)
    throw ConfigError("train: t must be >= 1 for multi_fold");
  if (feeding_mode == FeedingMode::teacher_crop &&
      !(r_c > 0.0 && r_c < 1.0))
    throw ConfigError("train: r_c must lie in (0,1) for teacher_crop");
  if (!(eta_start >= 0.0 && eta_start < 1.0) ||
      !(eta_end >= 0.0 && eta_end < 1.0) || eta_end < eta_start)
    throw ConfigError("train: momentum schedule must satisfy "
                      "0 <= start <= end < 1");
  if (norm_epsilon <= 0.0) throw ConfigError("train: norm_epsilon must be > 0");
}

double lr_schedule(std::size_t step, std::size_t total_steps,
                   std::size_t warmup_steps, double base_lr) {
  if (step > total_steps) step = total_steps;
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  const double pi = 3.14159265358979323846;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(pi * progress));
}

Trainer::Trainer(const VitConfig& model_cfg, const TrainConfig& train_cfg)
    : model_cfg_(model_cfg), cfg_(train_cfg) {
  model_cfg_.validate();
  cfg_.validate();
  if (cfg_.feeding_mode == FeedingMode::multi_fold) {
    const std::size_t masked =
        masked_count(model_cfg_.n_tokens(), cfg_.r);
    if (cfg_.t > masked)
      throw ConfigError("train: t exceeds the masked-token count");
  }
  student_ = init_vit<float>(model_cfg_, cfg_.seed);
  teacher_ = make_teacher(student_);
  params_ = named_params(student_);
  optimizer_.emplace(params_,
                     AdamWConfig{0.9f, 0.999f, 1e-8f,
                                 static_cast<float>(cfg_.weight_decay)});
}

std::size_t Trainer::steps_per_epoch(const Dataset& ds) const {
  return (ds.n_items() + cfg_.batch_size - 1) / cfg_.batch_size;
}

void Trainer::ensure_chunks(std::size_t n) {
  while (chunks_.size() < n) {
    Chunk c;
    c.state = clone_state(student_);
    c.params = named_params(c.state);
    chunks_.push_back(std::move(c));
  }
}

MaskPlan Trainer::plan_for(std::size_t item, std::size_t epoch,
                           std::size_t step_in_epoch, std::size_t slot) const {
  const std::uint64_t mask_seed =
      Rng::derive(cfg_.seed, {0x706c616eULL, epoch, step_in_epoch, slot});
  MaskPlan plan = sample_mask(model_cfg_.n_tokens(), cfg_.r, mask_seed);
  plan.feeding_mode = cfg_.feeding_mode;
  if (cfg_.feeding_mode == FeedingMode::multi_fold) {
    const std::uint64_t fold_seed =
        cfg_.fold_resample == FoldResample::per_step
            ? Rng::derive(mask_seed, {1})
            : Rng::derive(cfg_.seed, {0x66697864ULL, item});
    partition_folds(plan, cfg_.t, fold_seed);
  } else if (cfg_.feeding_mode == FeedingMode::teacher_crop) {
    teacher_crop(plan, cfg_.r_c, Rng::derive(mask_seed, {2}));
  }
  return plan;
}

double Trainer::image_loss(const VitState& state, const Dataset& ds,
                           std::size_t item, std::size_t epoch,
                           std::size_t step_in_epoch, std::size_t slot,
                           double inv_batch) {
  const MaskPlan plan = plan_for(item, epoch, step_in_epoch, slot);

  AugmentConfig aug;
  aug.enabled = cfg_.augment;
  const Tensor image = augmented_image(
      ds, item, aug, Rng::derive(cfg_.seed, {0x696d67ULL, epoch,
                                             step_in_epoch, slot}));
  const Tensor tokens = patchify(image, model_cfg_.patch_size);

  // Teacher targets, recording suppressed, before the student tape opens.
  TeacherTargets targets =
      teacher_forward_folds(model_cfg_, teacher_, student_.enc_pos, tokens,
                            plan);
  Tensor target_features =
      cfg_.normalization_on
          ? normalize_targets(targets.features,
                              static_cast<float>(cfg_.norm_epsilon))
          : targets.features;

  std::vector<float>* drop = nullptr;
  std::vector<float> drop_storage;
  if (model_cfg_.drop_path_rate > 0.0) {
    Rng dp(Rng::derive(cfg_.seed, {0x6470ULL, epoch, step_in_epoch, slot}));
    drop_storage.resize(model_cfg_.encoder_depth);
    const double keep = 1.0 - model_cfg_.drop_path_rate;
    for (auto& v : drop_storage)
      v = dp.uniform() < model_cfg_.drop_path_rate
              ? 0.0f
              : static_cast<float>(1.0 / keep);
    drop = &drop_storage;
  }

  Tape tape;
  TapeScope scope(tape);
  Tensor visible = ops::select_rows(tokens, plan.visible_idx);
  Tensor latents = encoder_forward(model_cfg_, state.encoder, state.enc_pos,
                                   visible, plan.visible_idx, drop);
  Tensor pred = decoder_forward(state, latents, plan);
  if (plan.feeding_mode == FeedingMode::teacher_crop) {
    // Loss only on the retained targets.
    std::vector<std::size_t> rows;
    rows.reserve(targets.target_idx.size());
    for (std::size_t idx : targets.target_idx) {
      const auto it = std::lower_bound(plan.masked_idx.begin(),
                                       plan.masked_idx.end(), idx);
      rows.push_back(static_cast<std::size_t>(it - plan.masked_idx.begin()));
    }
    pred = ops::select_rows(pred, rows);
  }
  Tensor loss = ops::cosine_loss(pred, target_features, 1e-12f,
                                 cfg_.loss_form == LossForm::per_token);
  const double loss_value = loss.item();
  Tensor scaled = ops::scale(loss, static_cast<float>(inv_batch));
  tape.backward(scaled);
  return loss_value;
}

StepMetrics Trainer::train_step(const Dataset& ds,
                                const std::vector<std::size_t>& batch,
                                std::size_t epoch,
                                std::size_t step_in_epoch) {
  if (batch.empty()) throw ContractError("train_step: empty batch");

  const std::size_t spe = steps_per_epoch(ds);
  const std::size_t global_step = epoch * spe + step_in_epoch;
  const double lr = lr_schedule(global_step, cfg_.epochs * spe,
                                cfg_.warmup_epochs * spe, cfg_.base_lr);
  const double eta =
      eta_schedule(MomentumSchedule{cfg_.eta_start, cfg_.eta_end, cfg_.epochs},
                   static_cast<double>(epoch));

  const std::size_t n_chunks = std::min<std::size_t>(8, batch.size());
  ensure_chunks(n_chunks);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<double> losses(batch.size(), 0.0);
  std::vector<std::string> errors(n_chunks);

  auto chunk_range = [&](std::size_t c) {
    const std::size_t lo = c * batch.size() / n_chunks;
    const std::size_t hi = (c + 1) * batch.size() / n_chunks;
    return std::pair<std::size_t, std::size_t>{lo, hi};
  };

  // Sync chunk clones to the current student weights, clear their grads.
  for (std::size_t c = 0; c < n_chunks; ++c) {
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& dst = chunks_[c].params[p].second;
      dst.data() = params_[p].second.data();
      dst.zero_grad();
    }
  }

#pragma omp parallel for num_threads(sdae::threads()) schedule(dynamic) \
    if (sdae::threads() > 1)
  for (long long ci = 0; ci < static_cast<long long>(n_chunks); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    try {
      const auto [lo, hi] = chunk_range(c);
      for (std::size_t s = lo; s < hi; ++s) {
        losses[s] = image_loss(chunks_[c].state, ds, batch[s], epoch,
                               step_in_epoch, s, inv_batch);
        if (!std::isfinite(losses[s]))
          throw TrainingError(
              "train: non-finite loss at step " + std::to_string(global_step) +
              " (lr=" + std::to_string(lr) + ", image slot " +
              std::to_string(s) + ")");
      }
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  }
  for (const auto& err : errors)
    if (!err.empty()) throw TrainingError(err);

  // Combine chunk gradients in chunk order (fixed, thread-independent).
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto& master = params_[p].second;
    auto& g = master.grad();
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const auto& src = chunks_[c].params[p].second;
      if (src.has_grad())
        kernels::serial::axpy(1.0f, src.grad_if()->data(), g.data(), g.size());
    }
  }

  optimizer_->step(static_cast<float>(lr));
  optimizer_->zero_grad();

  if (cfg_.ema_mode == EmaMode::per_iteration) {
    ema_update(teacher_, student_, eta);
    ++ema_calls_;
  }

  double loss_sum = 0.0;
  for (double l : losses) loss_sum += l;

  StepMetrics m;
  m.global_step = global_step;
  m.loss = loss_sum * inv_batch;
  m.lr = lr;
  m.eta = eta;
  return m;
}

EpochMetrics Trainer::train_epoch(const Dataset& ds, std::size_t epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t ema_before = ema_calls_;
  const auto batches =
      epoch_batches(ds.n_items(), std::min(cfg_.batch_size, ds.n_items()),
                    cfg_.seed, epoch);

  EpochMetrics em;
  em.epoch = epoch;
  for (std::size_t s = 0; s < batches.size(); ++s) {
    const StepMetrics sm = train_step(ds, batches[s], epoch, s);
    em.step_losses.push_back(sm.loss);
    em.last_lr = sm.lr;
    em.eta = sm.eta;
    if (metrics_out_ && (cfg_.log_every == 0 || s % cfg_.log_every == 0 ||
                         s + 1 == batches.size())) {
      (*metrics_out_) << "{\"step\":" << sm.global_step
                      << ",\"loss\":" << sm.loss << ",\"lr\":" << sm.lr
                      << ",\"eta\":" << sm.eta << "}\n";
    }
  }

  if (cfg_.ema_mode == EmaMode::per_epoch) {
    ema_update(teacher_, student_,
               eta_schedule(MomentumSchedule{cfg_.eta_start, cfg_.eta_end,
                                             cfg_.epochs},
                            static_cast<double>(epoch)));
    ++ema_calls_;
  }

  double total = 0.0;
  for (double l : em.step_losses) total += l;
  em.mean_loss = em.step_losses.empty()
                     ? 0.0
                     : total / static_cast<double>(em.step_losses.size());
  em.ema_calls = ema_calls_ - ema_before;
  em.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  next_epoch_ = epoch + 1;
  return em;
}

void Trainer::run(const Dataset& ds,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  for (std::size_t e = next_epoch_; e < cfg_.epochs; ++e) {
    const EpochMetrics em = train_epoch(ds, e);
    if (on_epoch) on_epoch(em);
  }
}

namespace {

// A u64 smuggled through two f32 payload slots, bit pattern preserved.
Tensor seed_tensor(std::uint64_t seed) {
  Tensor t = Tensor::zeros({2});
  std::memcpy(t.ptr(), &seed, sizeof seed);
  return t;
}

std::uint64_t seed_from_tensor(const Tensor& t) {
  std::uint64_t seed = 0;
  std::memcpy(&seed, t.ptr(), sizeof seed);
  return seed;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  NamedParams out;
  for (const auto& [name, t] : params_) out.add(name, t);
  auto teacher_params =
      teacher_named_params(const_cast<TeacherState&>(teacher_));
  for (const auto& [name, t] : teacher_params) out.add("teacher." + name, t);
  for (const auto& [name, t] : optimizer_->state_tensors()) out.add(name, t);
  out.add("meta.epoch",
          Tensor::scalar(static_cast<float>(next_epoch_)));
  out.add("meta.opt_step",
          Tensor::scalar(static_cast<float>(optimizer_->step_count())));
  out.add("meta.ema_calls",
          Tensor::scalar(static_cast<float>(ema_calls_)));
  out.add("meta.seed", seed_tensor(cfg_.seed));
  save_tensors(path, out);
}

void Trainer::load_checkpoint(const std::string& path) {
  NamedParams in = load_tensors(path);

  auto fetch = [&](const std::string& name) -> const Tensor& {
    const Tensor* t = in.find(name);
    if (!t) throw FormatError("checkpoint: missing tensor '" + name + "'");
    return *t;
  };
  auto copy_into = [&](const std::string& name, Tensor& dst) {
    const Tensor& src = fetch(name);
    if (src.shape() != dst.shape())
      throw FormatError("checkpoint: shape mismatch for '" + name + "': " +
                        shape_str(src.shape()) + " vs " +
                        shape_str(dst.shape()));
    dst.data() = src.data();
  };

  const std::uint64_t seed = seed_from_tensor(fetch("meta.seed"));
  if (seed != cfg_.seed)
    throw FormatError("checkpoint: seed mismatch (checkpoint " +
                      std::to_string(seed) + ", config " +
                      std::to_string(cfg_.seed) + ")");

  for (auto& [name, t] : params_) copy_into(name, t);
  for (auto& [name, t] : teacher_named_params(teacher_))
    copy_into("teacher." + name, t);

  NamedParams opt_state;
  for (auto& [name, t] : in)
    if (name.rfind("opt.", 0) == 0) opt_state.add(name, t);
  optimizer_->load_state_tensors(opt_state);
  optimizer_->set_step_count(
      static_cast<long long>(fetch("meta.opt_step").item()));
  next_epoch_ = static_cast<std::size_t>(fetch("meta.epoch").item());
  ema_calls_ = static_cast<std::size_t>(fetch("meta.ema_calls").item());
}

}  // namespace sdae

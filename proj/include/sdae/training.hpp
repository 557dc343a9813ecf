#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "sdae/data.hpp"
#include "sdae/distill.hpp"
#include "sdae/masking.hpp"
#include "sdae/optim.hpp"
#include "sdae/vit.hpp"

namespace sdae {

enum class EmaMode { per_epoch, per_iteration };
enum class LossForm { per_token, global };
enum class FoldResample { per_step, fixed };

const char* to_string(EmaMode m);
const char* to_string(LossForm f);
const char* to_string(FoldResample f);
EmaMode ema_mode_from_string(const std::string& s);
LossForm loss_form_from_string(const std::string& s);
FoldResample fold_resample_from_string(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 10;
  double base_lr = 3.75e-4;
  double weight_decay = 0.05;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  FeedingMode feeding_mode = FeedingMode::multi_fold;
  std::size_t t = 3;
  double r = 0.75;
  double r_c = 0.5;
  EmaMode ema_mode = EmaMode::per_epoch;
  bool normalization_on = true;
  std::size_t log_every = 10;
  std::size_t checkpoint_every = 0;  // epochs; 0 = only at the end
  double eta_start = 0.96;
  double eta_end = 0.99;
  double norm_epsilon = 1e-6;
  LossForm loss_form = LossForm::per_token;
  FoldResample fold_resample = FoldResample::per_step;
  bool augment = true;

  void validate() const;
};

// Linear warmup to base_lr over warmup_steps, then cosine decay to zero.
double lr_schedule(std::size_t step, std::size_t total_steps,
                   std::size_t warmup_steps, double base_lr);

struct StepMetrics {
  std::size_t global_step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double eta = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double last_lr = 0.0;
  double eta = 0.0;
  double wall_seconds = 0.0;
  std::size_t ema_calls = 0;
  std::vector<double> step_losses;
};

// Pretraining orchestration: batch assembly, per-image mask plans, student
// forward/backward, AdamW, EMA per the configured cadence.
//
// Gradients are accumulated per image into a fixed number of chunk buffers
// (a function of batch size only) and combined in chunk order, so results
// are bitwise identical for every thread count, including one.
class Trainer {
 public:
  Trainer(const VitConfig& model_cfg, const TrainConfig& train_cfg);

  StepMetrics train_step(const Dataset& ds,
                         const std::vector<std::size_t>& batch,
                         std::size_t epoch, std::size_t step_in_epoch);
  EpochMetrics train_epoch(const Dataset& ds, std::size_t epoch);

  // Runs epochs [start_epoch(), cfg.epochs); invokes on_epoch after each.
  void run(const Dataset& ds,
           const std::function<void(const EpochMetrics&)>& on_epoch = {});

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  VitState& student() { return student_; }
  const VitState& student() const { return student_; }
  TeacherState& teacher() { return teacher_; }
  AdamW& optimizer() { return *optimizer_; }
  const TrainConfig& config() const { return cfg_; }
  const VitConfig& model_config() const { return model_cfg_; }

  std::size_t start_epoch() const { return next_epoch_; }
  std::size_t steps_per_epoch(const Dataset& ds) const;
  std::size_t ema_calls() const { return ema_calls_; }

  // One JSON object per logged step: {"step":..,"loss":..,"lr":..,"eta":..}
  void set_metrics_stream(std::ostream* os) { metrics_out_ = os; }

 private:
  double image_loss(const VitState& state,
                    const Dataset& ds, std::size_t item, std::size_t epoch,
                    std::size_t step_in_epoch, std::size_t slot,
                    double inv_batch);
  MaskPlan plan_for(std::size_t item, std::size_t epoch,
                    std::size_t step_in_epoch, std::size_t slot) const;

  VitConfig model_cfg_;
  TrainConfig cfg_;
  VitState student_;
  TeacherState teacher_;
  std::optional<AdamW> optimizer_;
  NamedParams params_;

  // Per-chunk student clones; grads land here before the ordered combine.
  struct Chunk {
    VitState state;
    NamedParams params;
  };
  std::vector<Chunk> chunks_;
  void ensure_chunks(std::size_t n);

  std::size_t next_epoch_ = 0;
  std::size_t ema_calls_ = 0;
  std::ostream* metrics_out_ = nullptr;
};

}  // namespace sdae

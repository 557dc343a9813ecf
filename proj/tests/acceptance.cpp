// Acceptance suite: one criterion per function, one PASS/FAIL line each,
// nonzero exit when anything fails. Criterion numbers can be passed as
// arguments to run a subset (default: all).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "sdae/distill.hpp"
#include "sdae/eval.hpp"
#include "sdae/gradcheck.hpp"
#include "sdae/masking.hpp"
#include "sdae/ops.hpp"
#include "sdae/training.hpp"

using namespace sdae;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Criterion {
  int number;
  const char* title;
  bool (*run)(std::string& detail);
};

bool expect(bool ok, const std::string& what, std::string& detail) {
  if (!ok && detail.empty()) detail = what;
  return ok;
}

// ---------------------------------------------------------------------- 1
bool criterion_gradients(std::string& detail) {
  const double t0 = now();
  auto results = gradcheck::kernel_suite(20240601, 100);
  results.push_back(gradcheck::end_to_end_check(20240601));
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_rel_err);
    ok &= expect(r.pass, r.name + " rel err " + std::to_string(r.max_rel_err),
                 detail);
    ok &= expect(r.cases >= (r.name == "end_to_end" ? 1u : 100u),
                 r.name + " case count", detail);
  }
  const double wall = now() - t0;
  ok &= expect(wall < 120.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok)
    detail = "worst rel err " + std::to_string(worst) + ", " +
             std::to_string(wall) + "s";
  return ok;
}

// ---------------------------------------------------------------------- 2
bool criterion_complexity(std::string& detail) {
  const double t0 = now();
  bool ok = true;

  const double n = 196, d = 768, r = 0.75, rc = 0.3, t = 3;
  ok &= expect(
      complexity_estimate(FeedingMode::full_image, n, d, r, rc, t).cost ==
          n * n * d,
      "full_image formula", detail);
  ok &= expect(
      complexity_estimate(FeedingMode::only_masked, n, d, r, rc, t).cost ==
          n * n * r * r * d,
      "only_masked formula", detail);
  ok &= expect(complexity_estimate(FeedingMode::teacher_crop, n, d, r, rc, t,
                                   CropReading::retained)
                       .cost == n * n * (1.0 - rc) * (1.0 - rc) * r * r * d,
               "teacher_crop retained reading", detail);
  ok &= expect(complexity_estimate(FeedingMode::teacher_crop, n, d, r, rc, t,
                                   CropReading::literal)
                       .cost == n * n * rc * rc * r * r * d,
               "teacher_crop literal reading", detail);
  ok &= expect(
      complexity_estimate(FeedingMode::multi_fold, n, d, r, rc, t).cost ==
          (n / t) * (n / t) * t * r * r * d,
      "multi_fold formula", detail);
  ok &= expect(
      complexity_estimate(FeedingMode::full_image, 196, 768, r, rc, t).cost ==
          29503488.0,
      "196^2*768 value", detail);

  std::size_t points = 0;
  for (const double gn : {16.0, 64.0, 196.0, 256.0, 1024.0})
    for (const double gd : {48.0, 768.0})
      for (const double gr : {0.25, 0.5, 0.6, 0.75, 0.9})
        for (const double gt : {1.0, 2.0, 3.0, 4.0}) {
          const double om =
              complexity_estimate(FeedingMode::only_masked, gn, gd, gr, rc, gt)
                  .cost;
          const double mf =
              complexity_estimate(FeedingMode::multi_fold, gn, gd, gr, rc, gt)
                  .cost;
          ok &= expect(std::abs(mf - om / gt) <= 1e-12 * om,
                       "identity at n=" + std::to_string(gn), detail);
          ++points;
        }
  ok &= expect(points == 200, "grid size", detail);

  const double wall = now() - t0;
  ok &= expect(wall < 1.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok) detail = "200-point identity grid, " + std::to_string(wall) + "s";
  return ok;
}

// ---------------------------------------------------------------------- 3
bool criterion_partition(std::string& detail) {
  const double t0 = now();
  bool ok = true;

  MaskPlan paper = sample_mask(196, 0.75, 4);
  partition_folds(paper, 3, 5);
  ok &= expect(paper.visible_idx.size() == 49, "49 visible tokens", detail);
  for (const auto& fold : paper.folds)
    ok &= expect(fold.size() == 49, "fold of 49", detail);

  // Brute-force set oracle, independent of validate().
  auto oracle = [](const MaskPlan& plan) {
    std::set<std::size_t> visible(plan.visible_idx.begin(),
                                  plan.visible_idx.end());
    std::set<std::size_t> masked(plan.masked_idx.begin(),
                                 plan.masked_idx.end());
    if (visible.size() + masked.size() != plan.n_tokens) return false;
    for (std::size_t i : masked)
      if (visible.count(i)) return false;
    for (std::size_t i = 0; i < plan.n_tokens; ++i)
      if (!visible.count(i) && !masked.count(i)) return false;
    std::set<std::size_t> seen;
    std::size_t mn = SIZE_MAX, mx = 0;
    for (const auto& fold : plan.folds) {
      mn = std::min(mn, fold.size());
      mx = std::max(mx, fold.size());
      for (std::size_t i : fold) {
        if (!masked.count(i)) return false;
        if (!seen.insert(i).second) return false;
      }
    }
    return seen == masked && mx <= mn + 1;
  };

  for (std::size_t n = 8; n <= 64 && ok; ++n)
    for (const double r : {0.25, 0.5, 0.75})
      for (std::size_t t = 1; t <= 6; ++t) {
        const std::size_t m = masked_count(n, r);
        if (t > m) continue;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
          MaskPlan plan = sample_mask(n, r, seed * 1000 + n);
          partition_folds(plan, t, seed * 77 + t);
          ok &= expect(oracle(plan),
                       "oracle at n=" + std::to_string(n) + " t=" +
                           std::to_string(t),
                       detail);
          ok &= expect(validate(plan).empty(), "validate agrees", detail);
        }
      }

  const double wall = now() - t0;
  ok &= expect(wall < 30.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok) detail = "49/49/49 at N=196 + exhaustive N in [8,64], " +
                   std::to_string(wall) + "s";
  return ok;
}

// ---------------------------------------------------------------------- 4
bool criterion_distillation(std::string& detail) {
  const double t0 = now();
  bool ok = true;

  VitConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.encoder_depth = 2;
  cfg.decoder_depth = 1;
  cfg.embed_dim = 32;
  cfg.decoder_dim = 16;
  cfg.num_heads = 2;
  cfg.decoder_num_heads = 2;

  // Fixed points.
  {
    VitState student = init_vit<float>(cfg, 1);
    TeacherState teacher = make_teacher(student);
    for (auto& [name, t] : named_params(student))
      for (float& v : t.data()) v += 0.25f;

    NamedParams before;
    for (auto& [name, t] : teacher_named_params(teacher))
      before.add(name, t.clone());
    ema_update(teacher, student, 1.0);
    NamedParams phi = teacher_named_params(teacher);
    for (std::size_t i = 0; i < phi.size(); ++i)
      ok &= expect(bitwise_equal(phi[i].second, before[i].second),
                   "eta=1 fixed point", detail);

    ema_update(teacher, student, 0.0);
    NamedParams theta;
    collect_encoder_params(student.encoder, cfg.use_class_token, theta);
    phi = teacher_named_params(teacher);
    for (std::size_t i = 0; i < phi.size(); ++i)
      ok &= expect(bitwise_equal(phi[i].second, theta[i].second),
                   "eta=0 copy", detail);
  }

  // Geometric contraction |phi_k - theta| = eta^k |phi_0 - theta|.
  {
    VitState student = init_vit<float>(cfg, 2);
    TeacherState teacher = make_teacher(student);
    Rng rng(3);
    for (auto& [name, t] : teacher_named_params(teacher))
      for (float& v : t.data())
        v += static_cast<float>(rng.normal()) * 0.05f;
    NamedParams theta;
    collect_encoder_params(student.encoder, cfg.use_class_token, theta);
    auto dist = [&]() {
      double acc = 0.0;
      NamedParams phi = teacher_named_params(teacher);
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const auto& a = phi[i].second.data();
        const auto& b = theta[i].second.data();
        for (std::size_t j = 0; j < a.size(); ++j) {
          const double diff = double(a[j]) - double(b[j]);
          acc += diff * diff;
        }
      }
      return std::sqrt(acc);
    };
    const double d0 = dist();
    const double eta = 0.96;
    const int k = 20;
    for (int i = 0; i < k; ++i) ema_update(teacher, student, eta);
    const double ratio = dist() / d0;
    ok &= expect(std::abs(ratio - std::pow(eta, k)) < 1e-5,
                 "contraction ratio " + std::to_string(ratio), detail);
  }

  // Schedule endpoints, exactly.
  ok &= expect(eta_schedule(0.0, 300) == 0.96, "eta(0) == 0.96", detail);
  ok &= expect(eta_schedule(300.0, 300) == 0.99, "eta(total) == 0.99", detail);

  // Stop-gradient: a full train step (backward + optimizer) leaves phi
  // bitwise untouched; only the EMA call moves it.
  {
    SyntheticParams p;
    p.n_items = 16;
    p.image_size = 16;
    const Dataset ds = generate_synthetic(p);
    TrainConfig tc;
    tc.epochs = 2;
    tc.warmup_epochs = 0;
    tc.batch_size = 8;
    tc.seed = 4;
    Trainer trainer(cfg, tc);
    std::vector<float> phi_before;
    for (auto& [name, t] : teacher_named_params(trainer.teacher()))
      phi_before.insert(phi_before.end(), t.data().begin(), t.data().end());
    const auto batches = epoch_batches(16, 8, 4, 0);
    trainer.train_step(ds, batches[0], 0, 0);
    std::vector<float> phi_after;
    for (auto& [name, t] : teacher_named_params(trainer.teacher()))
      phi_after.insert(phi_after.end(), t.data().begin(), t.data().end());
    ok &= expect(std::memcmp(phi_before.data(), phi_after.data(),
                             phi_before.size() * 4) == 0,
                 "stop-gradient bitwise", detail);
    ema_update(trainer.teacher(), trainer.student(), 0.5);
    std::vector<float> phi_ema;
    for (auto& [name, t] : teacher_named_params(trainer.teacher()))
      phi_ema.insert(phi_ema.end(), t.data().begin(), t.data().end());
    ok &= expect(phi_ema != phi_after, "ema moves the teacher", detail);
  }

  const double wall = now() - t0;
  ok &= expect(wall < 60.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok) detail = std::to_string(wall) + "s";
  return ok;
}

// ---------------------------------------------------------------------- 5
bool criterion_loss_contracts(std::string& detail) {
  const double t0 = now();
  bool ok = true;

  Rng rng(5);
  TensorD f = TensorD::zeros({64, 64});
  for (double& v : f.data()) v = rng.normal() * 2.0 - 0.7;
  TensorD norm = normalize_targets(f, 1e-6);
  for (std::size_t i = 0; i < norm.rows() && ok; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < norm.cols(); ++j) mean += norm.at(i, j);
    mean /= static_cast<double>(norm.cols());
    for (std::size_t j = 0; j < norm.cols(); ++j) {
      const double d = norm.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(norm.cols());
    ok &= expect(std::abs(mean) < 1e-6, "row mean " + std::to_string(mean),
                 detail);
    ok &= expect(std::abs(var - 1.0) < 1e-4, "row var " + std::to_string(var),
                 detail);
  }

  Tensor p = Tensor::from_data({1, 3}, {2.0f, -1.0f, 0.5f});
  Tensor anti = Tensor::from_data({1, 3}, {-2.0f, 1.0f, -0.5f});
  Tensor ortho = Tensor::from_data({1, 3}, {1.0f, 2.0f, 0.0f});
  ok &= expect(std::abs(ops::cosine_loss(p, p, 1e-12f, true).item()) < 1e-6,
               "parallel -> 0", detail);
  ok &= expect(
      std::abs(ops::cosine_loss(p, anti, 1e-12f, true).item() - 2.0f) < 1e-6,
      "anti-parallel -> 2", detail);
  ok &= expect(
      std::abs(ops::cosine_loss(p, ortho, 1e-12f, true).item() - 1.0f) < 1e-6,
      "orthogonal -> 1", detail);

  Tensor target = Tensor::from_data({1, 3}, {0.4f, 0.8f, -1.0f});
  const float base = ops::cosine_loss(p, target, 1e-12f, true).item();
  for (const float s : {0.01f, 3.0f, 250.0f}) {
    const float scaled =
        ops::cosine_loss(ops::scale(p, s), target, 1e-12f, true).item();
    ok &= expect(std::abs(scaled - base) < 1e-6,
                 "scale invariance at " + std::to_string(s), detail);
  }

  const double wall = now() - t0;
  ok &= expect(wall < 10.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok) detail = std::to_string(wall) + "s";
  return ok;
}

// ---------------------------------------------------------------------- 6
bool criterion_learning_signal(std::string& detail) {
  const double t0 = now();
  if (const char* th = std::getenv("SDAE_ACCEPT_THREADS"))
    set_threads(std::atoi(th));

  VitConfig model;  // toy defaults: 32px/P4 -> N=64, dim 64, 4+2 blocks
  TrainConfig tc;   // toy defaults: r=0.75, t=3, batch 64, 100 epochs
  tc.seed = 42;

  SyntheticParams sp;
  sp.seed = 1;
  sp.n_items = 5000;
  sp.class_count = 4;
  sp.image_size = model.image_size;
  const Dataset train = generate_synthetic(sp);
  SyntheticParams ep = sp;
  ep.seed = Rng::derive(sp.seed, {0x6576616cULL});
  ep.n_items = 1000;
  const Dataset heldout = generate_synthetic(ep);

  Trainer trainer(model, tc);
  double first_epoch_loss = 0.0, last_epoch_loss = 0.0;
  trainer.run(train, [&](const EpochMetrics& em) {
    if (em.epoch == 0) first_epoch_loss = em.mean_loss;
    last_epoch_loss = em.mean_loss;
    if (em.epoch % 10 == 0 || em.epoch + 1 == tc.epochs)
      std::printf("  epoch %zu: loss %.4f (%.1fs)\n", em.epoch, em.mean_loss,
                  em.wall_seconds);
  });

  ProbeConfig probe;
  const BranchComparison cmp = compare_branches(
      trainer.student(), trainer.teacher(), train, heldout, probe);
  std::printf(
      "  probes: random %.3f, student %.3f, teacher %.3f (gap %.3f)\n",
      cmp.random_acc, cmp.student_acc, cmp.teacher_acc, cmp.gap);

  bool ok = true;
  ok &= expect(last_epoch_loss < 0.5 * first_epoch_loss,
               "(a) loss " + std::to_string(first_epoch_loss) + " -> " +
                   std::to_string(last_epoch_loss),
               detail);
  ok &= expect(cmp.student_acc >= cmp.random_acc + 0.10,
               "(b) student " + std::to_string(cmp.student_acc) +
                   " vs random " + std::to_string(cmp.random_acc),
               detail);
  ok &= expect(cmp.gap <= 0.05,
               "(c) teacher-student gap " + std::to_string(cmp.gap), detail);

  set_threads(1);
  const double wall = now() - t0;
  if (ok)
    detail = "loss " + std::to_string(first_epoch_loss) + " -> " +
             std::to_string(last_epoch_loss) + "; random " +
             std::to_string(cmp.random_acc) + ", student " +
             std::to_string(cmp.student_acc) + ", teacher " +
             std::to_string(cmp.teacher_acc) + "; " +
             std::to_string(wall / 60.0) + " min";
  return ok;
}

// ---------------------------------------------------------------------- 7
bool criterion_ablation_matrix(std::string& detail) {
  const double t0 = now();
  bool ok = true;

  VitConfig model;
  model.image_size = 16;
  model.patch_size = 4;
  model.encoder_depth = 2;
  model.decoder_depth = 1;
  model.embed_dim = 32;
  model.decoder_dim = 16;
  model.num_heads = 2;
  model.decoder_num_heads = 2;

  SyntheticParams sp;
  sp.n_items = 16;
  sp.image_size = 16;
  const Dataset ds = generate_synthetic(sp);

  struct Case {
    FeedingMode mode;
    bool normalize;
    const char* name;
  };
  // The four published ablation rows plus every feeding strategy.
  const std::vector<Case> cases = {
      {FeedingMode::full_image, false, "full_image/no-norm"},
      {FeedingMode::full_image, true, "full_image/norm"},
      {FeedingMode::only_masked, true, "only_masked/norm"},
      {FeedingMode::multi_fold, true, "multi_fold/norm"},
      {FeedingMode::teacher_crop, true, "teacher_crop/norm"},
  };
  for (const Case& c : cases) {
    TrainConfig tc;
    tc.epochs = 2;
    tc.warmup_epochs = 1;
    tc.batch_size = 8;
    tc.feeding_mode = c.mode;
    tc.normalization_on = c.normalize;
    tc.r_c = 0.5;
    tc.seed = 7;
    Trainer t(model, tc);
    const auto batches = epoch_batches(16, 8, 7, 0);
    for (std::size_t s = 0; s < 2; ++s) {
      const StepMetrics m = t.train_step(ds, batches[s], 0, s);
      ok &= expect(std::isfinite(m.loss),
                   std::string(c.name) + " finite loss", detail);
    }
  }

  // EMA cadence counts.
  for (const EmaMode mode : {EmaMode::per_epoch, EmaMode::per_iteration}) {
    TrainConfig tc;
    tc.epochs = 3;
    tc.warmup_epochs = 1;
    tc.batch_size = 8;
    tc.ema_mode = mode;
    tc.seed = 9;
    Trainer t(model, tc);
    t.run(ds);
    const std::size_t steps_total = 3 * t.steps_per_epoch(ds);
    const std::size_t want =
        mode == EmaMode::per_epoch ? 3 : steps_total;
    ok &= expect(t.ema_calls() == want,
                 std::string("ema calls ") + std::to_string(t.ema_calls()) +
                     " want " + std::to_string(want),
                 detail);
  }

  const double wall = now() - t0;
  ok &= expect(wall < 300.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok) detail = "4 ablation rows + 4 feeding modes, " +
                   std::to_string(wall) + "s";
  return ok;
}

// ---------------------------------------------------------------------- 8
bool criterion_determinism(std::string& detail) {
  const double t0 = now();
  bool ok = true;
  set_threads(1);

  VitConfig model;
  model.image_size = 16;
  model.patch_size = 4;
  model.encoder_depth = 2;
  model.decoder_depth = 1;
  model.embed_dim = 32;
  model.decoder_dim = 16;
  model.num_heads = 2;
  model.decoder_num_heads = 2;

  TrainConfig tc;
  tc.epochs = 4;
  tc.warmup_epochs = 1;
  tc.batch_size = 16;
  tc.seed = 1234;

  SyntheticParams sp;
  sp.n_items = 64;
  sp.image_size = 16;
  const Dataset ds = generate_synthetic(sp);

  auto flat = [](NamedParams params) {
    std::vector<float> out;
    for (auto& [name, t] : params)
      out.insert(out.end(), t.data().begin(), t.data().end());
    return out;
  };

  // Byte-identical repeat runs.
  std::vector<double> la, lb;
  Trainer a(model, tc);
  a.run(ds, [&](const EpochMetrics& em) {
    la.insert(la.end(), em.step_losses.begin(), em.step_losses.end());
  });
  Trainer b(model, tc);
  b.run(ds, [&](const EpochMetrics& em) {
    lb.insert(lb.end(), em.step_losses.begin(), em.step_losses.end());
  });
  ok &= expect(la == lb, "loss trajectories byte-identical", detail);
  ok &= expect(flat(named_params(a.student())) ==
                   flat(named_params(b.student())),
               "weights byte-identical", detail);

  // Checkpoint resume reproduces the uninterrupted run bitwise.
  Trainer half(model, tc);
  half.train_epoch(ds, 0);
  half.train_epoch(ds, 1);
  const std::string path = "/tmp/sdae_acceptance_resume.sdae";
  half.save_checkpoint(path);
  Trainer resumed(model, tc);
  resumed.load_checkpoint(path);
  resumed.run(ds);
  ok &= expect(flat(named_params(resumed.student())) ==
                   flat(named_params(a.student())),
               "resume matches straight run", detail);
  ok &= expect(flat(teacher_named_params(resumed.teacher())) ==
                   flat(teacher_named_params(a.teacher())),
               "teacher matches after resume", detail);
  std::remove(path.c_str());

  const double wall = now() - t0;
  ok &= expect(wall < 300.0, "runtime " + std::to_string(wall) + "s", detail);
  if (ok) detail = std::to_string(wall) + "s";
  return ok;
}

const Criterion kCriteria[] = {
    {1, "gradient suite (kernels 1e-4, end-to-end 1e-3)", criterion_gradients},
    {2, "attention-cost formulas and the multi-fold identity",
     criterion_complexity},
    {3, "partition invariants (196 -> 49+3x49, exhaustive oracle)",
     criterion_partition},
    {4, "distillation algebra (fixed points, contraction, stop-gradient)",
     criterion_distillation},
    {5, "loss contracts (normalization stats, cosine values)",
     criterion_loss_contracts},
    {6, "learning signal at desk scale (loss halving, probe gaps)",
     criterion_learning_signal},
    {7, "ablation matrix smoke (feeding modes, ema cadences)",
     criterion_ablation_matrix},
    {8, "determinism and persistence", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    std::printf("criterion %d: %s\n", c.number, c.title);
    std::fflush(stdout);
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", c.number,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sdae/checkpoint.hpp"
#include "sdae/config.hpp"
#include "sdae/eval.hpp"
#include "sdae/gradcheck.hpp"
#include "sdae/masking.hpp"
#include "sdae/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g_cmdline;

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir = "out";
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Every config key becomes a --snake_case flag; precedence is
// defaults < preset < config file < flags.
void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  cmd->add_option("--preset", args.preset, "named recipe: toy or paper");
  cmd->add_option("--out", args.out_dir, "output directory");
  for (const std::string& key : sdae::config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&args, key](const std::string& v) {
          args.overrides.emplace_back(key, v);
        },
        "config key " + key);
  }
}

sdae::RunConfig resolve_config(const CommonArgs& args) {
  sdae::RunConfig cfg;
  if (!args.preset.empty()) sdae::apply_preset(cfg, args.preset);
  if (!args.config_path.empty()) sdae::load_config_file(cfg, args.config_path);
  for (const auto& [key, value] : args.overrides)
    sdae::set_config_value(cfg, key, value);
  // Synthetic data always matches the model's input geometry.
  cfg.data.synth.image_size = cfg.model.image_size;
  cfg.data.synth.channels = cfg.model.channels;
  sdae::set_threads(cfg.threads);
  return cfg;
}

// The snapshot reproduces the run: the exact invocation plus the resolved
// key = value state (when the subcommand consumes the config at all).
void write_snapshot(const std::string& out_dir, const sdae::RunConfig* cfg) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir + "/resolved.config", std::ios::trunc);
  if (!os)
    throw sdae::ConfigError("cannot write '" + out_dir + "/resolved.config'");
  os << "# command: " << g_cmdline << "\n";
  if (cfg) os << sdae::serialize_config(*cfg);
}

void load_datasets(const sdae::RunConfig& cfg, sdae::Dataset& train,
                   sdae::Dataset& eval) {
  if (cfg.data.source == sdae::DataSource::synthetic) {
    train = sdae::generate_synthetic(cfg.data.synth);
    sdae::SyntheticParams ep = cfg.data.synth;
    ep.seed = sdae::Rng::derive(cfg.data.synth.seed, {0x6576616cULL});
    ep.n_items = cfg.holdout;
    eval = cfg.holdout > 0 ? sdae::generate_synthetic(ep) : sdae::Dataset{};
  } else {
    const sdae::Dataset whole = sdae::load_dataset(cfg.data);
    if (cfg.holdout >= whole.n_items())
      throw sdae::ConfigError("holdout exceeds the dataset size");
    train = sdae::slice_dataset(whole, 0, whole.n_items() - cfg.holdout);
    eval = cfg.holdout > 0
               ? sdae::slice_dataset(whole, whole.n_items() - cfg.holdout,
                                     cfg.holdout)
               : sdae::Dataset{};
  }
}

// Student (and optionally teacher) weights from a checkpoint file.
void load_model(const std::string& path, sdae::VitState& student,
                sdae::TeacherState* teacher) {
  const sdae::NamedParams in = sdae::load_tensors(path);
  auto copy_into = [&](const std::string& name, sdae::Tensor& dst) {
    const sdae::Tensor* src = in.find(name);
    if (!src)
      throw sdae::FormatError("checkpoint: missing tensor '" + name + "'");
    if (src->shape() != dst.shape())
      throw sdae::FormatError("checkpoint: shape mismatch for '" + name +
                              "': " + sdae::shape_str(src->shape()) + " vs " +
                              sdae::shape_str(dst.shape()));
    dst.data() = src->data();
  };
  for (auto& [name, t] : sdae::named_params(student)) copy_into(name, t);
  if (teacher)
    for (auto& [name, t] : sdae::teacher_named_params(*teacher))
      copy_into("teacher." + name, t);
}

int cmd_pretrain(const CommonArgs& args, const std::string& resume_path) {
  sdae::RunConfig cfg = resolve_config(args);
  write_snapshot(args.out_dir, &cfg);

  sdae::Dataset train, eval;
  load_datasets(cfg, train, eval);

  sdae::Trainer trainer(cfg.model, cfg.train);
  if (!resume_path.empty()) trainer.load_checkpoint(resume_path);

  std::ofstream metrics(args.out_dir + "/metrics.jsonl",
                        resume_path.empty() ? std::ios::trunc
                                            : std::ios::app);
  trainer.set_metrics_stream(&metrics);

  std::cout << "pretraining on " << train.n_items() << " images, "
            << cfg.train.epochs << " epochs, feeding "
            << to_string(cfg.train.feeding_mode) << "\n";
  trainer.run(train, [&](const sdae::EpochMetrics& em) {
    std::cout << "epoch " << em.epoch << ": loss " << em.mean_loss << ", lr "
              << em.last_lr << ", eta " << em.eta << ", "
              << em.wall_seconds << "s\n";
    if (cfg.train.checkpoint_every > 0 &&
        (em.epoch + 1) % cfg.train.checkpoint_every == 0) {
      trainer.save_checkpoint(args.out_dir + "/checkpoint_epoch" +
                              std::to_string(em.epoch + 1) + ".sdae");
    }
  });
  trainer.save_checkpoint(args.out_dir + "/checkpoint_final.sdae");
  std::cout << "final checkpoint: " << args.out_dir
            << "/checkpoint_final.sdae\n";
  return 0;
}

int cmd_probe(const CommonArgs& args,
              const std::vector<std::string>& checkpoints,
              const std::string& branch) {
  sdae::RunConfig cfg = resolve_config(args);
  write_snapshot(args.out_dir, &cfg);

  sdae::Dataset train, eval;
  load_datasets(cfg, train, eval);
  if (eval.n_items() == 0)
    throw sdae::ConfigError("probe: holdout must be > 0");

  std::ofstream csv(args.out_dir + "/probe.csv", std::ios::trunc);
  csv << "checkpoint,branch,accuracy,n_eval,seed\n";

  auto report = [&](const std::string& ckpt, const std::string& br,
                    double acc, std::size_t n_eval) {
    json j{{"branch", br},
           {"accuracy", acc},
           {"n_eval", n_eval},
           {"seed", cfg.probe.seed}};
    std::cout << j.dump() << "\n";
    csv << ckpt << "," << br << "," << acc << "," << n_eval << ","
        << cfg.probe.seed << "\n";
  };

  for (const std::string& ckpt : checkpoints) {
    sdae::VitState student = sdae::init_vit<float>(cfg.model, cfg.train.seed);
    sdae::TeacherState teacher = sdae::make_teacher(student);
    load_model(ckpt, student, &teacher);

    if (branch == "all") {
      const sdae::BranchComparison cmp =
          sdae::compare_branches(student, teacher, train, eval, cfg.probe);
      report(ckpt, "random_init", cmp.random_acc, eval.n_items());
      report(ckpt, "student", cmp.student_acc, eval.n_items());
      report(ckpt, "teacher", cmp.teacher_acc, eval.n_items());
      std::cout << "student-teacher gap: " << cmp.gap << "\n";
    } else if (branch == "student") {
      const auto res = sdae::linear_probe(cfg.model, student.encoder,
                                          student.enc_pos, train, eval,
                                          cfg.probe);
      report(ckpt, "student", res.accuracy, res.n_eval);
    } else if (branch == "teacher") {
      const auto res = sdae::linear_probe(cfg.model, teacher.params,
                                          student.enc_pos, train, eval,
                                          cfg.probe);
      report(ckpt, "teacher", res.accuracy, res.n_eval);
    } else {
      throw sdae::ConfigError("probe: unknown branch '" + branch +
                              "' (student|teacher|all)");
    }
  }
  return 0;
}

int cmd_grad_check(const CommonArgs& args, std::size_t cases,
                   std::uint64_t seed) {
  sdae::RunConfig cfg = resolve_config(args);
  write_snapshot(args.out_dir, &cfg);

  auto results = sdae::gradcheck::kernel_suite(seed, cases);
  results.push_back(sdae::gradcheck::end_to_end_check(seed));
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  max rel "
              << r.max_rel_err << " (tol " << r.tolerance << ", "
              << r.compared << " gradients)\n";
    ok &= r.pass;
  }
  return ok ? 0 : 2;
}

int cmd_complexity(const std::string& out_dir, double n, double d, double r,
                   double r_c, double t, const std::string& reading_name) {
  write_snapshot(out_dir, nullptr);

  sdae::CropReading reading;
  if (reading_name == "retained")
    reading = sdae::CropReading::retained;
  else if (reading_name == "literal")
    reading = sdae::CropReading::literal;
  else
    throw sdae::ConfigError("complexity: unknown r_c reading '" +
                            reading_name + "' (retained|literal)");

  std::cout << "mode,n,d,r,r_c,t,cost,ratio_vs_full\n";
  auto row = [&](sdae::FeedingMode mode) {
    const auto est = sdae::complexity_estimate(mode, n, d, r, r_c, t, reading);
    std::cout << to_string(mode) << "," << n << "," << d << "," << r << ","
              << r_c << "," << t << "," << est.cost << ","
              << est.ratio_vs_full << "\n";
    return est;
  };
  row(sdae::FeedingMode::full_image);
  const auto only = row(sdae::FeedingMode::only_masked);
  row(sdae::FeedingMode::teacher_crop);
  const auto multi = row(sdae::FeedingMode::multi_fold);
  std::cout << "multi_fold/only_masked = " << multi.cost / only.cost << "\n";
  return 0;
}

int cmd_mask_demo(const std::string& out_dir, std::size_t n, double r,
                  std::size_t t, std::uint64_t seed) {
  write_snapshot(out_dir, nullptr);
  sdae::MaskPlan plan =
      sdae::make_plan(n, r, sdae::FeedingMode::multi_fold, t, 0.0, seed);
  std::cout << sdae::ascii_grid(plan);
  json j;
  j["visible"] = plan.visible_idx;
  j["folds"] = plan.folds;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_attn_dump(const CommonArgs& args, const std::string& checkpoint,
                  const std::string& image_path, std::size_t synth_item) {
  sdae::RunConfig cfg = resolve_config(args);
  write_snapshot(args.out_dir, &cfg);

  sdae::VitState student = sdae::init_vit<float>(cfg.model, cfg.train.seed);
  if (!checkpoint.empty()) load_model(checkpoint, student, nullptr);

  sdae::Tensor image;
  if (!image_path.empty()) {
    std::size_t w = 0, h = 0;
    const auto rgb = sdae::load_ppm(image_path, w, h);
    if (w != cfg.model.image_size || h != cfg.model.image_size)
      throw sdae::ConfigError("attn-dump: image is " + std::to_string(w) +
                              "x" + std::to_string(h) + ", model expects " +
                              std::to_string(cfg.model.image_size));
    sdae::Dataset one;
    one.image_size = w;
    one.channels = 3;
    one.pixels = rgb;
    one.stats = sdae::compute_stats(one);
    image = sdae::standardized_image(one, 0);
  } else {
    const sdae::Dataset ds = sdae::generate_synthetic(cfg.data.synth);
    if (synth_item >= ds.n_items())
      throw sdae::ConfigError("attn-dump: --item out of range");
    image = sdae::standardized_image(ds, synth_item);
  }

  const sdae::AttentionMap maps = sdae::attention_map(student, image);
  fs::create_directories(args.out_dir);
  for (std::size_t h = 0; h < maps.head_rows.size(); ++h)
    sdae::write_attention_pgm(args.out_dir + "/attn_head" + std::to_string(h) +
                                  ".pgm",
                              maps.head_rows[h], maps.grid_side);
  sdae::write_attention_pgm(args.out_dir + "/attn_mean.pgm", maps.mean_row,
                            maps.grid_side);
  std::cout << "wrote " << maps.head_rows.size() << " head maps + mean to "
            << args.out_dir << " (" << maps.grid_side << "x" << maps.grid_side
            << ")\n";
  return 0;
}

int cmd_data_synth(const CommonArgs& args, const std::string& out_file) {
  sdae::RunConfig cfg = resolve_config(args);
  write_snapshot(args.out_dir, &cfg);

  const sdae::Dataset ds = sdae::generate_synthetic(cfg.data.synth);
  sdae::save_sdds(out_file, ds);
  std::cout << "wrote " << ds.n_items() << " images (" << ds.class_count
            << " classes) to " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    if (i) g_cmdline += " ";
    g_cmdline += argv[i];
  }

  CLI::App app{"self-distilled masked autoencoder toolkit"};
  app.require_subcommand(1);

  CommonArgs pretrain_args, probe_args, grad_args, attn_args, synth_args;

  auto* pretrain = app.add_subcommand("pretrain", "run the pretraining loop");
  add_common_options(pretrain, pretrain_args);
  std::string resume_path;
  pretrain->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* probe = app.add_subcommand(
      "probe", "linear probe on frozen encoder features");
  add_common_options(probe, probe_args);
  std::vector<std::string> probe_checkpoints;
  std::string probe_branch = "all";
  probe->add_option("--checkpoint", probe_checkpoints, "checkpoint file(s)")
      ->required();
  probe->add_option("--branch", probe_branch, "student|teacher|all");

  auto* grad = app.add_subcommand("grad-check",
                                  "finite-difference gradient suite");
  add_common_options(grad, grad_args);
  std::size_t grad_cases = 100;
  std::uint64_t grad_seed = 2024;
  grad->add_option("--cases", grad_cases, "random cases per kernel");
  grad->add_option("--check-seed", grad_seed, "suite seed");

  // Calculator subcommands keep their own short flags.
  auto* cx = app.add_subcommand("complexity",
                                "teacher-feeding attention-cost table");
  std::string cx_out = "out";
  double cx_n = 196, cx_d = 768, cx_r = 0.75, cx_rc = 0.5, cx_t = 3;
  std::string cx_reading = "retained";
  cx->add_option("--out", cx_out, "output directory");
  cx->add_option("--n", cx_n, "token count");
  cx->add_option("--d", cx_d, "channel dimension");
  cx->add_option("--r", cx_r, "mask ratio");
  cx->add_option("--r_c", cx_rc, "teacher crop ratio (fraction cropped away)");
  cx->add_option("--t", cx_t, "fold count");
  cx->add_option("--rc-reading", cx_reading,
                 "which fraction the crop formula squares: retained|literal");

  auto* mask = app.add_subcommand("mask-demo", "print a mask plan");
  std::string mask_out = "out";
  std::size_t mask_n = 64, mask_t = 3;
  double mask_r = 0.75;
  std::uint64_t mask_seed = 7;
  mask->add_option("--out", mask_out, "output directory");
  mask->add_option("--n", mask_n, "token count (square grid)");
  mask->add_option("--r", mask_r, "mask ratio");
  mask->add_option("--t", mask_t, "fold count");
  mask->add_option("--seed", mask_seed, "plan seed");

  auto* attn = app.add_subcommand("attn-dump",
                                  "export class-token attention maps as PGM");
  add_common_options(attn, attn_args);
  std::string attn_checkpoint, attn_image;
  std::size_t attn_item = 0;
  attn->add_option("--checkpoint", attn_checkpoint, "checkpoint file");
  attn->add_option("--image", attn_image, "input PPM image");
  attn->add_option("--item", attn_item, "synthetic dataset item");

  auto* data = app.add_subcommand("data", "dataset tooling");
  data->require_subcommand(1);
  auto* synth = data->add_subcommand("synth", "write a packed shape dataset");
  add_common_options(synth, synth_args);
  std::string synth_out = "synth.sdds";
  synth->add_option("--file", synth_out, "output .sdds path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage/config errors -> 1
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(pretrain_args, resume_path);
    if (probe->parsed())
      return cmd_probe(probe_args, probe_checkpoints, probe_branch);
    if (grad->parsed()) return cmd_grad_check(grad_args, grad_cases, grad_seed);
    if (cx->parsed())
      return cmd_complexity(cx_out, cx_n, cx_d, cx_r, cx_rc, cx_t, cx_reading);
    if (mask->parsed())
      return cmd_mask_demo(mask_out, mask_n, mask_r, mask_t, mask_seed);
    if (attn->parsed())
      return cmd_attn_dump(attn_args, attn_checkpoint, attn_image, attn_item);
    if (synth->parsed()) return cmd_data_synth(synth_args, synth_out);
  } catch (const sdae::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

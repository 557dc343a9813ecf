#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sdae/data.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SDAE_CLI_PATH) + " " + args + " 2>&1";
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe))
    res.output.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("complexity prints the table and the fold ratio") {
  const std::string out = fresh_dir("sdae_cli_cx");
  const RunResult res =
      run_cli("complexity --n 196 --d 768 --r 0.75 --t 3 --out " + out);
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("mode,n,d,r,r_c,t,cost,ratio_vs_full") !=
        std::string::npos);
  CHECK(res.output.find("multi_fold/only_masked = 0.333333") !=
        std::string::npos);
  CHECK(fs::exists(out + "/resolved.config"));
}

TEST_CASE("mask-demo is deterministic for a fixed seed") {
  const std::string out = fresh_dir("sdae_cli_mask");
  const std::string args = "mask-demo --n 64 --r 0.75 --t 3 --seed 7 --out " +
                           out;
  const RunResult a = run_cli(args);
  const RunResult b = run_cli(args);
  CHECK(a.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(a.output.find("\"visible\"") != std::string::npos);
  CHECK(a.output.find("\"folds\"") != std::string::npos);

  const RunResult c = run_cli("mask-demo --n 64 --r 0.75 --t 3 --seed 8 --out " +
                              out);
  CHECK(c.output != a.output);
}

TEST_CASE("unknown flags are rejected with exit code 1") {
  const RunResult res = run_cli("complexity --definitely-not-a-flag 3");
  CHECK(res.exit_code == 1);
}

TEST_CASE("bad configuration exits with code 1") {
  const std::string out = fresh_dir("sdae_cli_badcfg");
  const RunResult res = run_cli("mask-demo --n 64 --r 1.5 --out " + out);
  CHECK(res.exit_code == 1);
}

TEST_CASE("grad-check exits zero iff the suite passes") {
  const std::string out = fresh_dir("sdae_cli_grad");
  const RunResult res = run_cli("grad-check --cases 5 --out " + out);
  INFO(res.output);
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("PASS") != std::string::npos);
  CHECK(res.output.find("FAIL") == std::string::npos);
  CHECK(res.output.find("end_to_end") != std::string::npos);
}

TEST_CASE("data synth writes a loadable packed dataset") {
  const std::string out = fresh_dir("sdae_cli_synth");
  const std::string file = out + "/shapes.sdds";
  const RunResult res = run_cli("data synth --synth_items 24 --file " + file +
                                " --out " + out);
  CHECK(res.exit_code == 0);
  const sdae::Dataset ds = sdae::load_sdds(file);
  CHECK(ds.n_items() == 24);
  CHECK(ds.has_labels);
}

TEST_CASE("pretrain, probe, attn-dump pipeline") {
  const std::string out = fresh_dir("sdae_cli_train");
  // A deliberately tiny run: 2 epochs over 48 small images.
  const std::string common =
      " --image_size 16 --patch_size 4 --embed_dim 32 --decoder_dim 16 "
      "--encoder_depth 2 --decoder_depth 1 --num_heads 2 "
      "--decoder_num_heads 2 --synth_items 48 --holdout 16 --batch_size 16 "
      "--epochs 2 --warmup_epochs 1 --probe_epochs 4 --out " + out;

  const RunResult train = run_cli("pretrain" + common);
  INFO(train.output);
  CHECK(train.exit_code == 0);
  CHECK(fs::exists(out + "/checkpoint_final.sdae"));
  CHECK(fs::exists(out + "/metrics.jsonl"));
  CHECK(fs::exists(out + "/resolved.config"));
  {
    std::ifstream is(out + "/metrics.jsonl");
    std::string first_line;
    std::getline(is, first_line);
    CHECK(first_line.find("\"loss\":") != std::string::npos);
  }

  const RunResult probe = run_cli("probe --checkpoint " + out +
                                  "/checkpoint_final.sdae --branch all" +
                                  common);
  INFO(probe.output);
  CHECK(probe.exit_code == 0);
  CHECK(probe.output.find("\"branch\":\"student\"") != std::string::npos);
  CHECK(probe.output.find("\"branch\":\"teacher\"") != std::string::npos);
  CHECK(probe.output.find("\"branch\":\"random_init\"") != std::string::npos);
  CHECK(fs::exists(out + "/probe.csv"));

  const RunResult attn = run_cli("attn-dump --checkpoint " + out +
                                 "/checkpoint_final.sdae --item 0" + common);
  INFO(attn.output);
  CHECK(attn.exit_code == 0);
  CHECK(fs::exists(out + "/attn_head0.pgm"));
  CHECK(fs::exists(out + "/attn_mean.pgm"));

  // Missing checkpoint file is a runtime failure, exit code 2.
  const RunResult missing =
      run_cli("probe --checkpoint /nonexistent.sdae" + common);
  CHECK(missing.exit_code == 2);
}

TEST_CASE("resume produces the same final checkpoint as a straight run") {
  const std::string out_a = fresh_dir("sdae_cli_resume_a");
  const std::string out_b = fresh_dir("sdae_cli_resume_b");
  const std::string model =
      " --image_size 16 --patch_size 4 --embed_dim 32 --decoder_dim 16 "
      "--encoder_depth 1 --decoder_depth 1 --num_heads 2 "
      "--decoder_num_heads 2 --synth_items 32 --holdout 0 --batch_size 16 "
      "--warmup_epochs 1 ";

  const RunResult full =
      run_cli("pretrain" + model + "--epochs 4 --out " + out_a);
  CHECK(full.exit_code == 0);

  const RunResult half =
      run_cli("pretrain" + model + "--epochs 4 --checkpoint_every 2 --out " +
              out_b);
  CHECK(half.exit_code == 0);
  REQUIRE(fs::exists(out_b + "/checkpoint_epoch2.sdae"));
  const RunResult resumed =
      run_cli("pretrain" + model + "--epochs 4 --out " + out_b +
              " --resume " + out_b + "/checkpoint_epoch2.sdae");
  CHECK(resumed.exit_code == 0);

  std::ifstream fa(out_a + "/checkpoint_final.sdae", std::ios::binary);
  std::ifstream fb(out_b + "/checkpoint_final.sdae", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

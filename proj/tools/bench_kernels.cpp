// Times the serial reference kernels against the OpenMP variants and checks
// they agree bitwise. Shapes cover the transformer workloads (qkv/mlp GEMMs,
// attention softmax, layernorm) plus a large square GEMM.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sdae/kernels.hpp"
#include "sdae/rng.hpp"

using sdae::Rng;
namespace sk = sdae::kernels;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<float> rand_buf(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <typename F>
double time_best_of(F&& fn, int iters, int repeats = 3) {
  double best = 1e300;
  for (int rep = 0; rep < repeats; ++rep) {
    const double t0 = now();
    for (int i = 0; i < iters; ++i) fn();
    best = std::min(best, (now() - t0) / iters);
  }
  return best;
}

struct Row {
  std::string name;
  double flops;
  double serial_s;
  double omp_s;
  bool bitwise_equal;
};

void print_row(const Row& r) {
  std::printf("%-28s %9.2f GF/s serial %9.2f GF/s omp  x%.2f  %s\n",
              r.name.c_str(), r.flops / r.serial_s / 1e9,
              r.flops / r.omp_s / 1e9, r.serial_s / r.omp_s,
              r.bitwise_equal ? "bitwise-equal" : "MISMATCH");
}

Row bench_gemm(std::size_t m, std::size_t n, std::size_t k, int iters,
               Rng& rng) {
  const auto a = rand_buf(m * k, rng);
  const auto b = rand_buf(k * n, rng);
  std::vector<float> c_serial(m * n), c_omp(m * n);
  Row row;
  row.name = "gemm " + std::to_string(m) + "x" + std::to_string(n) + "x" +
             std::to_string(k);
  row.flops = 2.0 * m * n * k;
  row.serial_s = time_best_of(
      [&] {
        sk::serial::gemm_nn(m, n, k, a.data(), b.data(), c_serial.data(),
                            false);
      },
      iters);
  row.omp_s = time_best_of(
      [&] {
        sk::omp::gemm_nn(m, n, k, a.data(), b.data(), c_omp.data(), false);
      },
      iters);
  row.bitwise_equal =
      std::memcmp(c_serial.data(), c_omp.data(), m * n * sizeof(float)) == 0;
  return row;
}

Row bench_rows(const char* what, std::size_t rows, std::size_t cols,
               int iters, Rng& rng) {
  const auto x = rand_buf(rows * cols, rng);
  std::vector<float> y_serial(rows * cols), y_omp(rows * cols);
  std::vector<float> inv_a(rows), inv_b(rows);
  Row row;
  row.name = std::string(what) + " " + std::to_string(rows) + "x" +
             std::to_string(cols);
  row.flops = 5.0 * rows * cols;  // rough per-element work
  const bool softmax = std::string(what) == "softmax";
  row.serial_s = time_best_of(
      [&] {
        if (softmax)
          sk::serial::softmax_rows(x.data(), y_serial.data(), rows, cols);
        else
          sk::serial::layernorm_rows(x.data(), y_serial.data(), inv_a.data(),
                                     rows, cols, 1e-6f);
      },
      iters);
  row.omp_s = time_best_of(
      [&] {
        if (softmax)
          sk::omp::softmax_rows(x.data(), y_omp.data(), rows, cols);
        else
          sk::omp::layernorm_rows(x.data(), y_omp.data(), inv_b.data(), rows,
                                  cols, 1e-6f);
      },
      iters);
  row.bitwise_equal = std::memcmp(y_serial.data(), y_omp.data(),
                                  rows * cols * sizeof(float)) == 0;
  return row;
}

Row bench_gelu(std::size_t n, int iters, Rng& rng) {
  const auto x = rand_buf(n, rng);
  std::vector<float> y_serial(n), y_omp(n);
  Row row;
  row.name = "gelu " + std::to_string(n);
  row.flops = 8.0 * n;
  row.serial_s = time_best_of(
      [&] { sk::serial::gelu(x.data(), y_serial.data(), n); }, iters);
  row.omp_s =
      time_best_of([&] { sk::omp::gelu(x.data(), y_omp.data(), n); }, iters);
  row.bitwise_equal =
      std::memcmp(y_serial.data(), y_omp.data(), n * sizeof(float)) == 0;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 0;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  if (argc > 1) threads = std::atoi(argv[1]);
  if (threads < 1) threads = 1;
  sdae::set_threads(threads);

#ifdef _OPENMP
  std::printf("OpenMP enabled, %d thread(s)\n", threads);
#else
  std::printf("built without OpenMP; omp variants run serially\n");
#endif

  Rng rng(99);
  print_row(bench_gemm(17, 192, 64, 20000, rng));
  print_row(bench_gemm(65, 144, 48, 10000, rng));
  print_row(bench_gemm(65, 192, 48, 10000, rng));
  print_row(bench_gemm(512, 512, 512, 20, rng));
  print_row(bench_rows("softmax", 4096, 64, 2000, rng));
  print_row(bench_rows("layernorm", 4096, 64, 2000, rng));
  print_row(bench_gelu(1 << 20, 200, rng));
  return 0;
}

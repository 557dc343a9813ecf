#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "sdae/data.hpp"

using namespace sdae;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("P6 round-trip is bit-exact") {
  SyntheticParams p;
  p.n_items = 1;
  p.image_size = 32;
  const Dataset ds = generate_synthetic(p);

  const std::string f1 = tmp_path("sdae_rt1.ppm");
  const std::string f2 = tmp_path("sdae_rt2.ppm");
  save_ppm(f1, ds.raw(0), 32, 32);
  std::size_t w = 0, h = 0;
  const auto rgb = load_ppm(f1, w, h);
  CHECK(w == 32);
  CHECK(h == 32);
  CHECK(std::equal(rgb.begin(), rgb.end(), ds.raw(0)));
  save_ppm(f2, rgb.data(), w, h);
  CHECK(slurp(f1) == slurp(f2));
  std::remove(f1.c_str());
  std::remove(f2.c_str());
}

TEST_CASE("ppm parse errors carry location information") {
  const std::string path = tmp_path("sdae_bad.ppm");
  {
    std::ofstream os(path, std::ios::binary);
    os << "P6\n32 32\n255\n";
    os << "short";
  }
  std::size_t w = 0, h = 0;
  try {
    load_ppm(path, w, h);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("truncated") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);  // bytes actually read
  }
  {
    std::ofstream os(path, std::ios::binary);
    os << "P3\n2 2\n255\n0 0 0\n";
  }
  CHECK_THROWS_AS(load_ppm(path, w, h), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("packed dataset round-trip and errors") {
  SyntheticParams p;
  p.n_items = 20;
  p.class_count = 4;
  const Dataset ds = generate_synthetic(p);

  const std::string path = tmp_path("sdae_test.sdds");
  save_sdds(path, ds);
  const Dataset back = load_sdds(path);
  CHECK(back.n_items() == 20);
  CHECK(back.image_size == ds.image_size);
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);
  CHECK(back.class_count == 4);

  {
    std::ofstream os(path, std::ios::binary);
    os << "XXXX";
  }
  CHECK_THROWS_AS(load_sdds(path), FormatError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_sdds(path), FormatError);  // missing file
}

TEST_CASE("standardization brings channels to zero mean unit variance") {
  SyntheticParams p;
  p.n_items = 300;
  const Dataset ds = generate_synthetic(p);
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.n_items(); ++i) {
    const Tensor img = standardized_image(ds, i);
    for (float v : img.data()) {
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  const double mean = sum / count;
  const double var = sq / count - mean * mean;
  CHECK(std::abs(mean) < 1e-3);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("synthetic generation is deterministic and class-separable") {
  SyntheticParams p;
  p.n_items = 240;
  p.noise_std = 0.05;
  const Dataset a = generate_synthetic(p);
  const Dataset b = generate_synthetic(p);
  CHECK(a.pixels == b.pixels);
  CHECK(a.labels == b.labels);

  p.seed = 2;
  const Dataset c = generate_synthetic(p);
  CHECK(a.pixels != c.pixels);

  // Noise-free, jitter-free: one image per class, repeated.
  SyntheticParams clean = p;
  clean.noise_std = 0.0;
  clean.size_jitter = 0.0;
  clean.position_jitter = 0.0;
  const Dataset d = generate_synthetic(clean);
  for (std::size_t i = clean.class_count; i < d.n_items(); ++i) {
    const std::size_t j = i % clean.class_count;
    CHECK(std::equal(d.raw(i), d.raw(i) + d.item_bytes(), d.raw(j)));
  }

  // Pixel-space nearest centroid separates the classes.
  SyntheticParams fit_p = p;
  fit_p.seed = 11;
  SyntheticParams eval_p = p;
  eval_p.seed = 12;
  const double acc =
      centroid_accuracy(generate_synthetic(fit_p), generate_synthetic(eval_p));
  INFO("centroid accuracy ", acc);
  CHECK(acc >= 0.9);
}

TEST_CASE("epoch batches form a permutation") {
  const auto batches = epoch_batches(103, 16, 5, 2);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& b : batches) {
    total += b.size();
    for (std::size_t i : b) CHECK(seen.insert(i).second);
  }
  CHECK(total == 103);
  CHECK(batches.back().size() == 103 % 16);

  CHECK(epoch_batches(103, 16, 5, 2) == batches);      // same seed+epoch
  CHECK(epoch_batches(103, 16, 5, 3) != batches);      // next epoch reshuffles
  CHECK_THROWS_AS(epoch_batches(10, 11, 5, 0), ConfigError);
}

TEST_CASE("augmentation is a pure function of item and seed") {
  SyntheticParams p;
  p.n_items = 4;
  const Dataset ds = generate_synthetic(p);
  AugmentConfig aug;
  const Tensor a = augmented_image(ds, 1, aug, 77);
  const Tensor b = augmented_image(ds, 1, aug, 77);
  CHECK(bitwise_equal(a, b));
  const Tensor c = augmented_image(ds, 1, aug, 78);
  CHECK_FALSE(bitwise_equal(a, c));

  AugmentConfig off;
  off.enabled = false;
  CHECK(bitwise_equal(augmented_image(ds, 1, off, 77),
                      standardized_image(ds, 1)));
}

TEST_CASE("dataset slicing keeps labels aligned") {
  SyntheticParams p;
  p.n_items = 50;
  const Dataset ds = generate_synthetic(p);
  const Dataset tail = slice_dataset(ds, 40, 10);
  CHECK(tail.n_items() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(tail.labels[i] == ds.labels[40 + i]);
    CHECK(std::equal(tail.raw(i), tail.raw(i) + tail.item_bytes(),
                     ds.raw(40 + i)));
  }
  CHECK_THROWS_AS(slice_dataset(ds, 45, 10), ContractError);
}

TEST_CASE("loaded images keep shape and stay finite") {
  SyntheticParams p;
  p.n_items = 8;
  const Dataset ds = generate_synthetic(p);
  for (std::size_t i = 0; i < ds.n_items(); ++i) {
    const Tensor img = standardized_image(ds, i);
    CHECK(img.shape() ==
          std::vector<std::size_t>{ds.image_size, ds.image_size, ds.channels});
    CHECK(img.all_finite());
  }
}

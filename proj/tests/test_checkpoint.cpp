#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sdae/checkpoint.hpp"
#include "sdae/rng.hpp"

using namespace sdae;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("tensor container round-trips bit-exactly") {
  Rng rng(3);
  NamedParams out;
  Tensor a = Tensor::zeros({4, 7});
  for (float& v : a.data()) v = static_cast<float>(rng.normal());
  Tensor b = Tensor::zeros({1});
  b.data()[0] = -0.0f;  // sign bit must survive
  Tensor c = Tensor::zeros({2, 3, 5});
  for (float& v : c.data()) v = static_cast<float>(rng.normal()) * 1e-30f;
  out.add("encoder.block0.attn.qkv.weight", a);
  out.add("meta.epoch", b);
  out.add("deep.tensor", c);

  const std::string path = tmp_path("sdae_ckpt_test.sdae");
  save_tensors(path, out);
  const NamedParams in = load_tensors(path);
  REQUIRE(in.size() == 3);
  CHECK(in[0].first == "encoder.block0.attn.qkv.weight");
  CHECK(in[1].first == "meta.epoch");
  CHECK(bitwise_equal(*in.find("encoder.block0.attn.qkv.weight"), a));
  CHECK(bitwise_equal(*in.find("meta.epoch"), b));
  CHECK(bitwise_equal(*in.find("deep.tensor"), c));
  CHECK(in.find("deep.tensor")->shape() ==
        std::vector<std::size_t>{2, 3, 5});

  // Saving again produces an identical file.
  const std::string path2 = tmp_path("sdae_ckpt_test2.sdae");
  save_tensors(path2, in);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("container starts with the magic and version") {
  NamedParams out;
  out.add("x", Tensor::zeros({2}));
  const std::string path = tmp_path("sdae_ckpt_magic.sdae");
  save_tensors(path, out);
  std::ifstream is(path, std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  CHECK(std::string(magic, 4) == "SDAE");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  CHECK(version == kTensorFormatVersion);
  std::remove(path.c_str());
}

TEST_CASE("format errors on damage") {
  NamedParams out;
  out.add("first", Tensor::zeros({8}));
  out.add("second.tensor", Tensor::zeros({16}));
  const std::string path = tmp_path("sdae_ckpt_damage.sdae");
  save_tensors(path, out);

  SUBCASE("bad magic") {
    auto bytes = [&] {
      std::ifstream is(path, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
    }();
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_tensors(path), FormatError);
  }
  SUBCASE("truncation names the tensor being read") {
    auto bytes = [&] {
      std::ifstream is(path, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
    }();
    bytes.resize(bytes.size() - 20);  // cut into the second payload
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    try {
      load_tensors(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("second.tensor") != std::string::npos);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("no temp file left behind after a save") {
  NamedParams out;
  out.add("x", Tensor::zeros({2}));
  const std::string path = tmp_path("sdae_ckpt_tmp.sdae");
  save_tensors(path, out);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  std::remove(path.c_str());
}

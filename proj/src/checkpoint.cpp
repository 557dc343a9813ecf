#include "sdae/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

namespace sdae {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError("tensor file: truncated while reading " + what);
  return v;
}

std::uint64_t read_u64(std::istream& is, const std::string& what) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError("tensor file: truncated while reading " + what);
  return v;
}

}  // namespace

void save_tensors(const std::string& path, const NamedParams& tensors) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("tensor file: cannot open '" + tmp + "'");
    os.write("SDAE", 4);
    write_u32(os, kTensorFormatVersion);
    write_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      write_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(os, static_cast<std::uint32_t>(t.ndim()));
      for (std::size_t d : t.shape()) write_u64(os, d);
      os.write(reinterpret_cast<const char*>(t.ptr()),
               static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!os) throw FormatError("tensor file: write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw FormatError("tensor file: cannot move '" + tmp + "' to '" + path +
                      "'");
}

NamedParams load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("tensor file: cannot open '" + path + "'");
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "SDAE", 4) != 0)
    throw FormatError("tensor file: bad magic in '" + path + "'");
  const std::uint32_t version = read_u32(is, "version");
  if (version != kTensorFormatVersion)
    throw FormatError("tensor file: unsupported version " +
                      std::to_string(version));
  const std::uint32_t count = read_u32(is, "tensor count");
  NamedParams out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw FormatError("tensor file: truncated name at tensor " +
                        std::to_string(i));
    const std::uint32_t rank = read_u32(is, "rank of '" + name + "'");
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(
          read_u64(is, "dims of '" + name + "'"));
      numel *= shape[d];
    }
    std::vector<float> data(numel);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(numel * sizeof(float))))
      throw FormatError("tensor file: truncated payload of '" + name + "'");
    out.add(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace sdae

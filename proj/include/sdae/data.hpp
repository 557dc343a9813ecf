#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdae/tensor.hpp"

namespace sdae {

struct ChannelStats {
  std::vector<double> mean;  // per channel, computed on [0,1] values
  std::vector<double> std_dev;
};

enum class DataSource { synthetic, packed, ppm_dir };

DataSource data_source_from_string(const std::string& s);
const char* to_string(DataSource s);

struct SyntheticParams {
  std::uint64_t seed = 1;
  std::size_t n_items = 1000;
  std::size_t class_count = 4;  // shape types: disk, square, triangle, ...
  std::size_t image_size = 32;
  std::size_t channels = 3;
  double noise_std = 0.05;
  double size_jitter = 0.12;     // relative shape-size range
  double position_jitter = 0.15; // center offset relative to image size
};

struct DatasetManifest {
  DataSource source = DataSource::synthetic;
  std::string path;  // packed file or PPM directory
  SyntheticParams synth;
};

// Images are kept as the original 8-bit pixels; float views are derived on
// demand so PPM round-trips stay bit-exact.
struct Dataset {
  std::size_t image_size = 0;
  std::size_t channels = 0;
  bool has_labels = false;
  std::size_t class_count = 0;
  std::vector<std::uint8_t> pixels;  // n * size * size * channels, HWC
  std::vector<std::uint16_t> labels;
  ChannelStats stats;

  std::size_t n_items() const {
    return item_bytes() == 0 ? 0 : pixels.size() / item_bytes();
  }
  std::size_t item_bytes() const {
    return image_size * image_size * channels;
  }
  const std::uint8_t* raw(std::size_t item) const {
    return pixels.data() + item * item_bytes();
  }
};

// Per-channel mean/std over the whole dataset on the [0,1] scale.
ChannelStats compute_stats(const Dataset& ds);

// Deterministic labeled shape dataset (shape type = label).
Dataset generate_synthetic(const SyntheticParams& params);

// Packed container: magic "SDDS", u32 version, u32 count, u16 size,
// u8 channels, u8 label flag, then per item an optional u16 label followed
// by raw u8 pixels. Little-endian.
Dataset load_sdds(const std::string& path);
void save_sdds(const std::string& path, const Dataset& ds);

// Binary PPM (P6, maxval 255). Parse errors carry the byte offset.
void save_ppm(const std::string& path, const std::uint8_t* rgb,
              std::size_t width, std::size_t height);
std::vector<std::uint8_t> load_ppm(const std::string& path,
                                   std::size_t& width, std::size_t& height);
// All *.ppm files in a directory (sorted by name); unlabeled.
Dataset load_ppm_dir(const std::string& dir);

Dataset load_dataset(const DatasetManifest& manifest);

// Contiguous item range [first, first + count) as a standalone dataset;
// stats are recomputed on the slice.
Dataset slice_dataset(const Dataset& ds, std::size_t first,
                      std::size_t count);

// Epoch-seeded permutation split into batches; the last partial batch is
// kept. Every item appears exactly once.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_items,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::size_t epoch);

struct AugmentConfig {
  bool enabled = true;
  bool hflip = true;
  double min_area = 0.2;  // random-resized-crop area range
  double max_area = 1.0;
};

// Standardized [H x W x C] float image; augmentation is a pure function of
// (item, seed).
Tensor standardized_image(const Dataset& ds, std::size_t item);
Tensor augmented_image(const Dataset& ds, std::size_t item,
                       const AugmentConfig& cfg, std::uint64_t seed);

// Pixel-space nearest-centroid classifier accuracy (fit on `fit`, scored on
// `eval`); the sanity oracle for class separability.
double centroid_accuracy(const Dataset& fit, const Dataset& eval);

}  // namespace sdae

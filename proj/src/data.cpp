#include "sdae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sdae/rng.hpp"

namespace sdae {

DataSource data_source_from_string(const std::string& s) {
  if (s == "synthetic") return DataSource::synthetic;
  if (s == "packed") return DataSource::packed;
  if (s == "ppm_dir") return DataSource::ppm_dir;
  throw ConfigError("unknown data source '" + s + "'");
}

const char* to_string(DataSource s) {
  switch (s) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::packed: return "packed";
    case DataSource::ppm_dir: return "ppm_dir";
  }
  return "?";
}

ChannelStats compute_stats(const Dataset& ds) {
  ChannelStats st;
  st.mean.assign(ds.channels, 0.0);
  st.std_dev.assign(ds.channels, 1.0);
  const std::size_t per_channel = ds.pixels.size() / ds.channels;
  if (per_channel == 0) return st;
  std::vector<double> sum(ds.channels, 0.0), sq(ds.channels, 0.0);
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) {
    const double v = ds.pixels[i] / 255.0;
    const std::size_t c = i % ds.channels;
    sum[c] += v;
    sq[c] += v * v;
  }
  for (std::size_t c = 0; c < ds.channels; ++c) {
    st.mean[c] = sum[c] / static_cast<double>(per_channel);
    const double var = sq[c] / static_cast<double>(per_channel) -
                       st.mean[c] * st.mean[c];
    st.std_dev[c] = std::sqrt(std::max(var, 1e-12));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

namespace {

enum class Shape { disk, square, triangle, cross, ring, diamond };
constexpr std::size_t kShapeCount = 6;

void draw_shape(std::vector<float>& img, std::size_t size, Shape shape,
                double cx, double cy, double radius, float fg) {
  auto inside = [&](double x, double y) -> bool {
    const double dx = x - cx, dy = y - cy;
    switch (shape) {
      case Shape::disk:
        return dx * dx + dy * dy <= radius * radius;
      case Shape::square:
        return std::abs(dx) <= radius && std::abs(dy) <= radius;
      case Shape::triangle:
        // upright triangle: tip at (cx, cy - r)
        return dy >= -radius && dy <= radius &&
               std::abs(dx) <= (dy + radius) * 0.5;
      case Shape::cross:
        return (std::abs(dx) <= radius * 0.35 && std::abs(dy) <= radius) ||
               (std::abs(dy) <= radius * 0.35 && std::abs(dx) <= radius);
      case Shape::ring: {
        const double rr = dx * dx + dy * dy;
        return rr <= radius * radius && rr >= 0.3 * radius * radius;
      }
      case Shape::diamond:
        return std::abs(dx) + std::abs(dy) <= radius;
    }
    return false;
  };
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      if (inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5))
        img[y * size + x] = fg;
}

}  // namespace

Dataset generate_synthetic(const SyntheticParams& p) {
  if (p.class_count < 2 || p.class_count > kShapeCount)
    throw ConfigError("synthetic: class count must lie in [2, " +
                      std::to_string(kShapeCount) + "]");
  if (p.image_size < 8) throw ConfigError("synthetic: image size too small");
  if (p.channels == 0) throw ConfigError("synthetic: zero channels");

  Dataset ds;
  ds.image_size = p.image_size;
  ds.channels = p.channels;
  ds.has_labels = true;
  ds.class_count = p.class_count;
  ds.pixels.resize(p.n_items * ds.item_bytes());
  ds.labels.resize(p.n_items);

  const auto size = static_cast<double>(p.image_size);
  std::vector<float> gray(p.image_size * p.image_size);
  for (std::size_t item = 0; item < p.n_items; ++item) {
    Rng rng(Rng::derive(p.seed, {0x73796e74ULL, item}));
    const auto label = static_cast<std::uint16_t>(item % p.class_count);
    ds.labels[item] = label;

    std::fill(gray.begin(), gray.end(), 0.15f);
    const double jitter = p.position_jitter * size * 0.5;
    const double cx = size * 0.5 + (rng.uniform() * 2.0 - 1.0) * jitter;
    const double cy = size * 0.5 + (rng.uniform() * 2.0 - 1.0) * jitter;
    const double base_r = size * 0.28;
    const double radius =
        base_r * (1.0 + (rng.uniform() * 2.0 - 1.0) * p.size_jitter);
    draw_shape(gray, p.image_size, static_cast<Shape>(label), cx, cy, radius,
               0.85f);

    std::uint8_t* out = ds.pixels.data() + item * ds.item_bytes();
    for (std::size_t px = 0; px < gray.size(); ++px) {
      const double noisy =
          gray[px] + (p.noise_std > 0.0 ? rng.normal() * p.noise_std : 0.0);
      const double clamped = std::clamp(noisy, 0.0, 1.0);
      const auto q = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
      for (std::size_t c = 0; c < p.channels; ++c)
        out[px * p.channels + c] = q;
    }
  }
  ds.stats = compute_stats(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Packed container

namespace {

constexpr std::uint32_t kSddsVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError(std::string("sdds: truncated while reading ") + what);
  return v;
}

}  // namespace

void save_sdds(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("sdds: cannot open '" + path + "'");
  os.write("SDDS", 4);
  write_pod<std::uint32_t>(os, kSddsVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n_items()));
  write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(ds.image_size));
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(ds.channels));
  write_pod<std::uint8_t>(os, ds.has_labels ? 1 : 0);
  for (std::size_t i = 0; i < ds.n_items(); ++i) {
    if (ds.has_labels) write_pod<std::uint16_t>(os, ds.labels[i]);
    os.write(reinterpret_cast<const char*>(ds.raw(i)),
             static_cast<std::streamsize>(ds.item_bytes()));
  }
  if (!os) throw FormatError("sdds: write failed for '" + path + "'");
}

Dataset load_sdds(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("sdds: cannot open '" + path + "'");
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "SDDS", 4) != 0)
    throw FormatError("sdds: bad magic in '" + path + "'");
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kSddsVersion)
    throw FormatError("sdds: unsupported version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(is, "item count");
  Dataset ds;
  ds.image_size = read_pod<std::uint16_t>(is, "image size");
  ds.channels = read_pod<std::uint8_t>(is, "channel count");
  ds.has_labels = read_pod<std::uint8_t>(is, "label flag") != 0;
  if (ds.image_size == 0 || ds.channels == 0)
    throw FormatError("sdds: zero image size or channels");
  ds.pixels.resize(static_cast<std::size_t>(count) * ds.item_bytes());
  if (ds.has_labels) ds.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (ds.has_labels)
      ds.labels[i] = read_pod<std::uint16_t>(is, "label");
    if (!is.read(reinterpret_cast<char*>(ds.pixels.data() +
                                         std::size_t(i) * ds.item_bytes()),
                 static_cast<std::streamsize>(ds.item_bytes())))
      throw FormatError("sdds: truncated pixels at item " + std::to_string(i));
  }
  if (ds.has_labels)
    for (std::uint16_t l : ds.labels)
      ds.class_count = std::max<std::size_t>(ds.class_count, l + 1);
  ds.stats = compute_stats(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// PPM

void save_ppm(const std::string& path, const std::uint8_t* rgb,
              std::size_t width, std::size_t height) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("ppm: cannot open '" + path + "'");
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb),
           static_cast<std::streamsize>(width * height * 3));
  if (!os) throw FormatError("ppm: write failed for '" + path + "'");
}

namespace {

// Skips whitespace and '#' comments, returns the next integer token.
std::size_t ppm_int(std::istream& is, const std::string& path) {
  int ch = is.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = is.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = is.get();
  }
  if (ch == EOF || !std::isdigit(ch))
    throw FormatError("ppm: malformed header in '" + path + "' at byte " +
                      std::to_string(is.tellg() == -1
                                         ? -1
                                         : static_cast<long long>(is.tellg())));
  std::size_t v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + static_cast<std::size_t>(ch - '0');
    ch = is.get();
  }
  if (ch != EOF) is.unget();
  return v;
}

}  // namespace

std::vector<std::uint8_t> load_ppm(const std::string& path, std::size_t& width,
                                   std::size_t& height) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("ppm: cannot open '" + path + "'");
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (!is || m0 != 'P' || m1 != '6')
    throw FormatError("ppm: '" + path + "' is not a binary P6 file");
  width = ppm_int(is, path);
  height = ppm_int(is, path);
  const std::size_t maxval = ppm_int(is, path);
  if (maxval != 255)
    throw FormatError("ppm: unsupported maxval " + std::to_string(maxval) +
                      " in '" + path + "'");
  is.get();  // single whitespace after maxval
  std::vector<std::uint8_t> rgb(width * height * 3);
  if (!is.read(reinterpret_cast<char*>(rgb.data()),
               static_cast<std::streamsize>(rgb.size()))) {
    const auto got = static_cast<long long>(is.gcount());
    throw FormatError("ppm: truncated payload in '" + path + "', got " +
                      std::to_string(got) + " of " +
                      std::to_string(rgb.size()) + " bytes");
  }
  return rgb;
}

Dataset load_ppm_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (!fs::is_directory(dir))
    throw FormatError("ppm: '" + dir + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".ppm") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FormatError("ppm: no .ppm files in '" + dir + "'");

  Dataset ds;
  ds.channels = 3;
  for (const auto& file : files) {
    std::size_t w = 0, h = 0;
    auto rgb = load_ppm(file.string(), w, h);
    if (w != h)
      throw FormatError("ppm: '" + file.string() + "' is not square");
    if (ds.image_size == 0) ds.image_size = w;
    if (w != ds.image_size)
      throw FormatError("ppm: size mismatch in '" + file.string() + "' (" +
                        std::to_string(w) + " vs " +
                        std::to_string(ds.image_size) + ")");
    ds.pixels.insert(ds.pixels.end(), rgb.begin(), rgb.end());
  }
  ds.stats = compute_stats(ds);
  return ds;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  switch (manifest.source) {
    case DataSource::synthetic: return generate_synthetic(manifest.synth);
    case DataSource::packed: return load_sdds(manifest.path);
    case DataSource::ppm_dir: return load_ppm_dir(manifest.path);
  }
  throw ConfigError("load_dataset: unknown source");
}

Dataset slice_dataset(const Dataset& ds, std::size_t first,
                      std::size_t count) {
  if (first + count > ds.n_items())
    throw ContractError("slice_dataset: range [" + std::to_string(first) +
                        ", " + std::to_string(first + count) +
                        ") exceeds " + std::to_string(ds.n_items()) +
                        " items");
  Dataset out;
  out.image_size = ds.image_size;
  out.channels = ds.channels;
  out.has_labels = ds.has_labels;
  out.class_count = ds.class_count;
  out.pixels.assign(ds.pixels.begin() + first * ds.item_bytes(),
                    ds.pixels.begin() + (first + count) * ds.item_bytes());
  if (ds.has_labels)
    out.labels.assign(ds.labels.begin() + first,
                      ds.labels.begin() + first + count);
  out.stats = compute_stats(out);
  return out;
}

// ---------------------------------------------------------------------------
// Batching & augmentation

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_items,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::size_t epoch) {
  if (batch_size == 0 || batch_size > n_items)
    throw ConfigError("batches: batch size " + std::to_string(batch_size) +
                      " not in [1, " + std::to_string(n_items) + "]");
  std::vector<std::size_t> perm(n_items);
  for (std::size_t i = 0; i < n_items; ++i) perm[i] = i;
  Rng rng(Rng::derive(seed, {0x62617463ULL, epoch}));
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t off = 0; off < n_items; off += batch_size) {
    const std::size_t len = std::min(batch_size, n_items - off);
    out.emplace_back(perm.begin() + off, perm.begin() + off + len);
  }
  return out;
}

namespace {

std::vector<float> to_unit(const Dataset& ds, std::size_t item) {
  const std::uint8_t* raw = ds.raw(item);
  std::vector<float> out(ds.item_bytes());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(raw[i]) / 255.0f;
  return out;
}

Tensor standardize(const Dataset& ds, std::vector<float> unit) {
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const std::size_t c = i % ds.channels;
    unit[i] = static_cast<float>((unit[i] - ds.stats.mean[c]) /
                                 ds.stats.std_dev[c]);
  }
  return Tensor::from_data({ds.image_size, ds.image_size, ds.channels},
                           std::move(unit));
}

// Bilinear sample from the [0,1] source image, clamped coordinates.
float sample_bilinear(const std::vector<float>& src, std::size_t size,
                      std::size_t channels, double x, double y,
                      std::size_t c) {
  x = std::clamp(x, 0.0, static_cast<double>(size - 1));
  y = std::clamp(y, 0.0, static_cast<double>(size - 1));
  const auto x0 = static_cast<std::size_t>(x);
  const auto y0 = static_cast<std::size_t>(y);
  const std::size_t x1 = std::min(x0 + 1, size - 1);
  const std::size_t y1 = std::min(y0 + 1, size - 1);
  const auto fx = static_cast<float>(x - static_cast<double>(x0));
  const auto fy = static_cast<float>(y - static_cast<double>(y0));
  auto get = [&](std::size_t yy, std::size_t xx) {
    return src[(yy * size + xx) * channels + c];
  };
  const float top = get(y0, x0) * (1.0f - fx) + get(y0, x1) * fx;
  const float bot = get(y1, x0) * (1.0f - fx) + get(y1, x1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

}  // namespace

Tensor standardized_image(const Dataset& ds, std::size_t item) {
  return standardize(ds, to_unit(ds, item));
}

Tensor augmented_image(const Dataset& ds, std::size_t item,
                       const AugmentConfig& cfg, std::uint64_t seed) {
  std::vector<float> unit = to_unit(ds, item);
  if (!cfg.enabled) return standardize(ds, std::move(unit));

  Rng rng(Rng::derive(seed, {0x617567ULL, item}));
  const std::size_t size = ds.image_size;
  const auto fsize = static_cast<double>(size);

  // Random resized crop: sample an area fraction and aspect ratio, fall back
  // to the full frame when the box does not fit.
  double crop_w = fsize, crop_h = fsize, x0 = 0.0, y0 = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area =
        (cfg.min_area + rng.uniform() * (cfg.max_area - cfg.min_area)) *
        fsize * fsize;
    const double log_ratio = std::log(3.0 / 4.0) +
                             rng.uniform() * (std::log(4.0 / 3.0) -
                                              std::log(3.0 / 4.0));
    const double ratio = std::exp(log_ratio);
    const double w = std::sqrt(area * ratio);
    const double h = std::sqrt(area / ratio);
    if (w <= fsize && h <= fsize) {
      crop_w = w;
      crop_h = h;
      x0 = rng.uniform() * (fsize - w);
      y0 = rng.uniform() * (fsize - h);
      break;
    }
  }

  const bool flip = cfg.hflip && rng.uniform() < 0.5;

  std::vector<float> out(ds.item_bytes());
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = flip ? size - 1 - x : x;
      const double src_x =
          x0 + (static_cast<double>(sx) + 0.5) / fsize * crop_w - 0.5;
      const double src_y =
          y0 + (static_cast<double>(y) + 0.5) / fsize * crop_h - 0.5;
      for (std::size_t c = 0; c < ds.channels; ++c)
        out[(y * size + x) * ds.channels + c] =
            sample_bilinear(unit, size, ds.channels, src_x, src_y, c);
    }
  return standardize(ds, std::move(out));
}

double centroid_accuracy(const Dataset& fit, const Dataset& eval) {
  if (!fit.has_labels || !eval.has_labels)
    throw ContractError("centroid: both datasets need labels");
  const std::size_t k = fit.class_count;
  const std::size_t dim = fit.item_bytes();
  std::vector<double> centroid(k * dim, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < fit.n_items(); ++i) {
    const std::uint8_t* raw = fit.raw(i);
    double* c = centroid.data() + fit.labels[i] * dim;
    for (std::size_t j = 0; j < dim; ++j) c[j] += raw[j] / 255.0;
    ++count[fit.labels[i]];
  }
  for (std::size_t y = 0; y < k; ++y)
    if (count[y])
      for (std::size_t j = 0; j < dim; ++j)
        centroid[y * dim + j] /= static_cast<double>(count[y]);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.n_items(); ++i) {
    const std::uint8_t* raw = eval.raw(i);
    double best = 1e300;
    std::size_t best_y = 0;
    for (std::size_t y = 0; y < k; ++y) {
      double d2 = 0.0;
      const double* c = centroid.data() + y * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = raw[j] / 255.0 - c[j];
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        best_y = y;
      }
    }
    hits += best_y == eval.labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(eval.n_items());
}

}  // namespace sdae

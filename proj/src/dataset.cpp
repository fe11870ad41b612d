#include "tskd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "tskd/rng.hpp"

namespace tskd {

template <typename S>
Batch<S> Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("Dataset::batch: empty index list");
  const std::size_t per = image_size();
  std::vector<S> values(indices.size() * per);
  Batch<S> out;
  out.labels.reserve(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    if (i >= size()) throw IndexError("Dataset::batch: index " + std::to_string(i) + " >= " + std::to_string(size()));
    std::copy(images.begin() + static_cast<std::ptrdiff_t>(i * per),
              images.begin() + static_cast<std::ptrdiff_t>((i + 1) * per), values.begin() + static_cast<std::ptrdiff_t>(b * per));
    out.labels.push_back(labels[i]);
  }
  out.images = Tensor<S>(Shape{indices.size(), channels, height, width}, std::move(values));
  return out;
}

template Batch<float> Dataset::batch(std::span<const std::size_t>) const;
template Batch<double> Dataset::batch(std::span<const std::size_t>) const;

Dataset Dataset::head(std::size_t n) const {
  Dataset out = *this;
  if (n >= size()) return out;
  out.labels.resize(n);
  out.images.resize(n * image_size());
  return out;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

namespace {

std::string hex_bytes(std::span<const std::uint8_t> bytes, std::size_t n) {
  std::string out = "0x";
  char buf[3];
  for (std::size_t i = 0; i < n && i < bytes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
    out += buf;
  }
  return out;
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

// Validates magic and returns the dimension sizes.
std::vector<std::size_t> idx_header(std::span<const std::uint8_t> bytes, std::uint32_t magic, std::size_t ndim,
                                    const char* what) {
  if (bytes.size() < 4) {
    throw TruncatedError(std::string("IDX ") + what + ": file too short for a magic number (" +
                         std::to_string(bytes.size()) + " bytes)");
  }
  if (read_be32(bytes, 0) != magic) {
    char expected[16];
    std::snprintf(expected, sizeof expected, "0x%08x", magic);
    throw FormatError(std::string("IDX ") + what + ": bad magic " + hex_bytes(bytes, 4) + ", expected " + expected);
  }
  if (bytes.size() < 4 + 4 * ndim) {
    throw TruncatedError(std::string("IDX ") + what + ": header truncated");
  }
  std::vector<std::size_t> dims;
  for (std::size_t d = 0; d < ndim; ++d) dims.push_back(read_be32(bytes, 4 + 4 * d));
  return dims;
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  const auto dims = idx_header(bytes, 0x00000803, 3, "images");
  IdxImages out{dims[0], dims[1], dims[2], {}};
  if (out.rows == 0 || out.cols == 0) throw FormatError("IDX images: zero-sized image dimensions");
  const std::size_t body = bytes.size() - 16;
  // Guard the multiplication before trusting it as an allocation size.
  if (out.count > body || out.rows * out.cols > body || (out.count && out.rows * out.cols > body / out.count)) {
    throw TruncatedError("IDX images: header announces " + std::to_string(out.count) + "x" + std::to_string(out.rows) +
                         "x" + std::to_string(out.cols) + " pixels but only " + std::to_string(body) +
                         " bytes follow");
  }
  const std::size_t need = out.count * out.rows * out.cols;
  if (body != need) {
    if (body < need) throw TruncatedError("IDX images: body truncated");
    throw FormatError("IDX images: " + std::to_string(body - need) + " trailing bytes");
  }
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  const auto dims = idx_header(bytes, 0x00000801, 1, "labels");
  const std::size_t body = bytes.size() - 8;
  if (body != dims[0]) {
    if (body < dims[0]) {
      throw TruncatedError("IDX labels: header announces " + std::to_string(dims[0]) + " labels but only " +
                           std::to_string(body) + " bytes follow");
    }
    throw FormatError("IDX labels: " + std::to_string(body - dims[0]) + " trailing bytes");
  }
  return {bytes.begin() + 8, bytes.end()};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  write_be32(out, 0x00000803);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, 0x00000801);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = parse_idx_images(read_file_bytes(images_path));
  const auto labels = parse_idx_labels(read_file_bytes(labels_path));
  if (images.count != labels.size()) {
    throw FormatError("IDX: " + std::to_string(images.count) + " images but " + std::to_string(labels.size()) +
                      " labels");
  }
  Dataset ds;
  ds.channels = 1;
  ds.height = images.rows;
  ds.width = images.cols;
  ds.images.resize(images.pixels.size());
  for (std::size_t i = 0; i < images.pixels.size(); ++i) ds.images[i] = static_cast<float>(images.pixels[i]) / 255.0f;
  ds.labels.assign(labels.begin(), labels.end());
  int max_label = 0;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  ds.split = images_path.filename().string();
  return ds;
}

Dataset synth_dataset(const SynthParams& p) {
  if (p.classes < 2) throw ContractError("synth_dataset: need at least 2 classes");
  if (p.size < 8) throw ContractError("synth_dataset: image size must be >= 8");
  Dataset ds;
  ds.channels = 1;
  ds.height = ds.width = p.size;
  ds.classes = p.classes;
  ds.split = "synthetic";
  const std::size_t n = p.n_per_class * p.classes;
  ds.images.assign(n * p.size * p.size, 0.0f);
  ds.labels.resize(n);

  Rng rng(derive_seed(p.seed, 0x51a7ULL));
  const double h = static_cast<double>(p.size);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    // Interleave classes so that any prefix stays balanced.
    const std::size_t c = i % p.classes;
    ds.labels[i] = static_cast<int>(c);
    const double angle = pi * static_cast<double>(c) / static_cast<double>(p.classes) +
                         rng.uniform(-0.2, 0.2) * pi / static_cast<double>(p.classes);
    const double cx = h / 2 + rng.uniform(-p.jitter, p.jitter);
    const double cy = h / 2 + rng.uniform(-p.jitter, p.jitter);
    const double half_len = 0.32 * h;
    const double width = rng.uniform(1.0, 1.6);
    const double blob_angle = 2 * pi * static_cast<double>(c) / static_cast<double>(p.classes);
    const double bx = cx + 0.3 * h * std::cos(blob_angle) + rng.uniform(-1.0, 1.0);
    const double by = cy + 0.3 * h * std::sin(blob_angle) + rng.uniform(-1.0, 1.0);
    const double ux = std::cos(angle), uy = std::sin(angle);
    float* img = ds.images.data() + i * p.size * p.size;
    for (std::size_t r = 0; r < p.size; ++r) {
      for (std::size_t col = 0; col < p.size; ++col) {
        const double dx = static_cast<double>(col) + 0.5 - cx;
        const double dy = static_cast<double>(r) + 0.5 - cy;
        const double along = dx * ux + dy * uy;
        const double across = -dx * uy + dy * ux;
        const double over = std::max(0.0, std::abs(along) - half_len);
        double v = std::exp(-(across * across + over * over) / (2 * width * width));
        const double bdx = static_cast<double>(col) + 0.5 - bx, bdy = static_cast<double>(r) + 0.5 - by;
        v += 0.8 * std::exp(-(bdx * bdx + bdy * bdy) / (2 * 1.8 * 1.8));
        v += p.noise * rng.normal();
        img[r * p.size + col] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return ds;
}

Dataset synth_dataset(std::uint64_t seed, std::size_t n_per_class, std::size_t classes, std::size_t size) {
  SynthParams p;
  p.seed = seed;
  p.n_per_class = n_per_class;
  p.classes = classes;
  p.size = size;
  return synth_dataset(p);
}

}  // namespace tskd

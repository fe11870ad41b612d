#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tskd/tensor.hpp"

namespace tskd {

template <typename S>
struct Batch {
  Tensor<S> images;  // [N,C,H,W]
  std::vector<int> labels;
};

/// Images scaled to [0,1] with integer labels in [0, classes).
struct Dataset {
  std::vector<float> images;
  std::vector<int> labels;
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::string split;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return channels * height * width; }

  template <typename S>
  Batch<S> batch(std::span<const std::size_t> indices) const;

  /// First `n` samples (all of them when n >= size()).
  Dataset head(std::size_t n) const;
};

/// Deterministic shuffle of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);

// IDX (big-endian header) images: magic 0x00000803, dims n, rows, cols;
// labels: magic 0x00000801, dim n.
struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct SynthParams {
  std::uint64_t seed = 0;
  std::size_t n_per_class = 50;
  std::size_t classes = 10;
  std::size_t size = 28;
  double noise = 0.1;   // additive Gaussian pixel noise
  double jitter = 2.0;  // pattern offset range in pixels
};

/// Class-conditioned oriented bars plus a class-placed blob, with seeded
/// jitter and noise. A pure function of its parameters.
Dataset synth_dataset(const SynthParams& params);
Dataset synth_dataset(std::uint64_t seed, std::size_t n_per_class, std::size_t classes, std::size_t size);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace tskd

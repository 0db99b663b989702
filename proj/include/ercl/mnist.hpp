#pragma once

// MNIST IDX ingestion, 7x7 downsampling, and permuted-pixel tasks.

#include "rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ercl {

class MnistError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages
{
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels; // count * rows * cols, row-major per image

  std::span<std::uint8_t const> image(std::size_t i) const
  {
    std::size_t const n = std::size_t(rows) * cols;
    return {pixels.data() + i * n, n};
  }
};

struct IdxLabels
{
  std::vector<std::uint8_t> labels;
};

IdxImages parse_idx_images(std::span<std::uint8_t const> bytes);
IdxLabels parse_idx_labels(std::span<std::uint8_t const> bytes);

/// Serialize in the big-endian IDX layout (used for fixtures and tooling).
std::vector<std::uint8_t> encode_idx_images(IdxImages const &images);
std::vector<std::uint8_t> encode_idx_labels(IdxLabels const &labels);

/// File contents, transparently gunzipped when compressed.
std::vector<std::uint8_t> read_maybe_gzip(std::filesystem::path const &path);

struct MnistRaw
{
  IdxImages train_images;
  IdxLabels train_labels;
  IdxImages test_images;
  IdxLabels test_labels;
};

/// The four standard file names, each with or without a .gz suffix.
inline constexpr char const *kMnistFiles[4] = {
  "train-images-idx3-ubyte",
  "train-labels-idx1-ubyte",
  "t10k-images-idx3-ubyte",
  "t10k-labels-idx1-ubyte",
};

MnistRaw mnist_load(std::filesystem::path const &dir);

/// Non-overlapping 4x4 average pooling of a 28x28 image, scaled to [0, 1].
/// Returned 7x7 in image orientation.
Eigen::MatrixXf mnist_downsample(std::span<std::uint8_t const> image28);

/// Pooled but unscaled cell values (0..255).
Eigen::MatrixXf mnist_pool(std::span<std::uint8_t const> image28);

/// Downsampled images, one row-major flattened 49-vector per column.
struct MnistDataset
{
  Eigen::MatrixXf train_x; // 49 x N_train
  std::vector<std::uint8_t> train_y;
  Eigen::MatrixXf test_x; // 49 x N_test
  std::vector<std::uint8_t> test_y;
};

MnistDataset mnist_prepare(MnistRaw const &raw);

struct PermutedMnistTask
{
  std::vector<int> permutation; // pixel i of a task image is pixel permutation[i] of the source
  Eigen::MatrixXf train_x;
  std::vector<std::uint8_t> train_y;
  Eigen::MatrixXf test_x;
  std::vector<std::uint8_t> test_y;
};

PermutedMnistTask mnist_make_task(MnistDataset const &data, std::vector<int> permutation);
PermutedMnistTask mnist_make_task(MnistDataset const &data, Rng &rng);

Eigen::MatrixXf permute_rows(Eigen::MatrixXf const &x, std::vector<int> const &permutation);

} // namespace ercl

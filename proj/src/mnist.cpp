#include "ercl/mnist.hpp"

#include <zlib.h>

#include <cstdio>

#include <algorithm>
#include <numeric>

namespace ercl {

namespace {

std::uint32_t read_be32(std::span<std::uint8_t const> bytes, std::size_t offset)
{
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t> &out, std::uint32_t v)
{
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

std::string hex32(std::uint32_t v)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

} // namespace

IdxImages parse_idx_images(std::span<std::uint8_t const> bytes)
{
  if (bytes.size() < 16) {
    throw MnistError("IDX images: file too short for header (" + std::to_string(bytes.size()) + " bytes)");
  }
  std::uint32_t const magic = read_be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    throw MnistError("IDX images: bad magic " + hex32(magic) + ", expected " + hex32(kIdxImagesMagic));
  }
  IdxImages out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  std::size_t const expected = std::size_t(out.count) * out.rows * out.cols;
  if (bytes.size() - 16 != expected) {
    throw MnistError("IDX images: header declares " + std::to_string(out.count) + " images of " +
                     std::to_string(out.rows) + "x" + std::to_string(out.cols) + " (" + std::to_string(expected) +
                     " bytes) but payload has " + std::to_string(bytes.size() - 16) + " bytes");
  }
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

IdxLabels parse_idx_labels(std::span<std::uint8_t const> bytes)
{
  if (bytes.size() < 8) {
    throw MnistError("IDX labels: file too short for header (" + std::to_string(bytes.size()) + " bytes)");
  }
  std::uint32_t const magic = read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    throw MnistError("IDX labels: bad magic " + hex32(magic) + ", expected " + hex32(kIdxLabelsMagic));
  }
  std::uint32_t const count = read_be32(bytes, 4);
  if (bytes.size() - 8 != count) {
    throw MnistError("IDX labels: header declares " + std::to_string(count) + " labels but payload has " +
                     std::to_string(bytes.size() - 8) + " bytes");
  }
  IdxLabels out;
  out.labels.assign(bytes.begin() + 8, bytes.end());
  for (auto l : out.labels) {
    if (l > 9) {
      throw MnistError("IDX labels: label " + std::to_string(l) + " outside 0..9");
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_images(IdxImages const &images)
{
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxImagesMagic);
  write_be32(out, images.count);
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(IdxLabels const &labels)
{
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(std::filesystem::path const &path)
{
  // gzread passes uncompressed files through unchanged.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) {
    throw MnistError("cannot open " + path.string());
  }
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) {
    out.insert(out.end(), buf, buf + n);
  }
  int err = 0;
  char const *msg = gzerror(f, &err);
  std::string const what = msg ? msg : "";
  gzclose(f);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
    throw MnistError("corrupt compressed file " + path.string() + ": " + what);
  }
  return out;
}

namespace {

std::filesystem::path locate(std::filesystem::path const &dir, std::string const &name)
{
  for (auto const &candidate : {dir / name, dir / (name + ".gz")}) {
    if (std::filesystem::exists(candidate)) {
      return candidate;
    }
  }
  throw MnistError("missing MNIST file " + (dir / name).string() + "[.gz]; run `ercl fetch-mnist --dir " +
                   dir.string() + "` first");
}

} // namespace

MnistRaw mnist_load(std::filesystem::path const &dir)
{
  MnistRaw raw;
  raw.train_images = parse_idx_images(read_maybe_gzip(locate(dir, kMnistFiles[0])));
  raw.train_labels = parse_idx_labels(read_maybe_gzip(locate(dir, kMnistFiles[1])));
  raw.test_images = parse_idx_images(read_maybe_gzip(locate(dir, kMnistFiles[2])));
  raw.test_labels = parse_idx_labels(read_maybe_gzip(locate(dir, kMnistFiles[3])));
  if (raw.train_images.count != raw.train_labels.labels.size() ||
      raw.test_images.count != raw.test_labels.labels.size()) {
    throw MnistError("MNIST image and label counts disagree");
  }
  for (IdxImages const *im : {&raw.train_images, &raw.test_images}) {
    if (im->rows != 28 || im->cols != 28) {
      throw MnistError("MNIST images must be 28x28, got " + std::to_string(im->rows) + "x" + std::to_string(im->cols));
    }
  }
  return raw;
}

Eigen::MatrixXf mnist_pool(std::span<std::uint8_t const> image28)
{
  if (image28.size() != 28 * 28) {
    throw MnistError("mnist_downsample: expected 784 pixels, got " + std::to_string(image28.size()));
  }
  Eigen::MatrixXf out = Eigen::MatrixXf::Zero(7, 7);
  for (int r = 0; r < 28; ++r) {
    for (int c = 0; c < 28; ++c) {
      out(r / 4, c / 4) += static_cast<float>(image28[std::size_t(r) * 28 + c]);
    }
  }
  return out / 16.0f;
}

Eigen::MatrixXf mnist_downsample(std::span<std::uint8_t const> image28) { return mnist_pool(image28) / 255.0f; }

namespace {

Eigen::MatrixXf flatten_images(IdxImages const &images)
{
  Eigen::MatrixXf x(49, images.count);
  for (std::size_t i = 0; i < images.count; ++i) {
    Eigen::MatrixXf const small = mnist_downsample(images.image(i));
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 7; ++c) {
        x(r * 7 + c, static_cast<Eigen::Index>(i)) = small(r, c);
      }
    }
  }
  return x;
}

} // namespace

MnistDataset mnist_prepare(MnistRaw const &raw)
{
  return {flatten_images(raw.train_images), raw.train_labels.labels, flatten_images(raw.test_images),
          raw.test_labels.labels};
}

Eigen::MatrixXf permute_rows(Eigen::MatrixXf const &x, std::vector<int> const &permutation)
{
  Eigen::MatrixXf out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = x.row(permutation[static_cast<std::size_t>(i)]);
  }
  return out;
}

PermutedMnistTask mnist_make_task(MnistDataset const &data, std::vector<int> permutation)
{
  std::vector<int> check = permutation;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i) {
    if (check[i] != static_cast<int>(i)) {
      throw std::invalid_argument("mnist_make_task: not a permutation of 0..48");
    }
  }
  if (static_cast<Eigen::Index>(permutation.size()) != data.train_x.rows()) {
    throw std::invalid_argument("mnist_make_task: permutation length does not match pixel count");
  }
  PermutedMnistTask t;
  t.train_x = permute_rows(data.train_x, permutation);
  t.test_x = permute_rows(data.test_x, permutation);
  t.train_y = data.train_y;
  t.test_y = data.test_y;
  t.permutation = std::move(permutation);
  return t;
}

PermutedMnistTask mnist_make_task(MnistDataset const &data, Rng &rng)
{
  std::vector<int> perm(static_cast<std::size_t>(data.train_x.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm.begin(), perm.end());
  return mnist_make_task(data, std::move(perm));
}

} // namespace ercl

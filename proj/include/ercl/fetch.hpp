#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ercl {

inline constexpr char const *kDefaultMnistMirror = "https://ossci-datasets.s3.amazonaws.com/mnist/";

/// Published MD5 sums of the four gzip-compressed MNIST files.
struct MnistFileSpec
{
  char const *name;
  char const *md5;
};

inline constexpr MnistFileSpec kMnistDownloads[4] = {
  {"train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
  {"train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"},
  {"t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"},
  {"t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"},
};

std::string md5_hex(std::span<std::uint8_t const> bytes);

/// GET `url` (http, https, or file://). Throws on failure.
std::vector<std::uint8_t> download(std::string const &url);

/// Fetch the MNIST files from `mirror` into `dir`, skipping files already
/// present with the right checksum. Returns the paths written or kept.
std::vector<std::filesystem::path> fetch_mnist(std::filesystem::path const &dir,
                                               std::string const &mirror = kDefaultMnistMirror);

/// Data directory: `fallback` unless the ERCL_DATA_DIR environment variable is set.
std::filesystem::path data_dir(std::filesystem::path const &fallback);

} // namespace ercl

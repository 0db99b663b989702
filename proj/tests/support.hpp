#pragma once

#include "ercl/grad.hpp"
#include "ercl/rng.hpp"

#include <filesystem>
#include <string>

namespace ercl::test {

inline Mat<double> random_matrix(Rng &rng, Index rows, Index cols, double lo = -1.0, double hi = 1.0)
{
  Mat<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(lo, hi);
  }
  return m;
}

/// Plain triple loop, the reference for matrix products.
inline Mat<double> matmul_oracle(Mat<double> const &a, Mat<double> const &b)
{
  Mat<double> c = Mat<double>::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      for (Index k = 0; k < a.cols(); ++k) {
        c(i, j) += a(i, k) * b(k, j);
      }
    }
  }
  return c;
}

class TempDir
{
public:
  explicit TempDir(std::string const &tag)
  {
    path_ = std::filesystem::temp_directory_path() /
            ("ercl-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(TempDir const &) = delete;
  TempDir &operator=(TempDir const &) = delete;
  std::filesystem::path const &path() const { return path_; }

private:
  std::filesystem::path path_;
};

} // namespace ercl::test

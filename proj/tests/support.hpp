#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>

#include "pfeddl/types.hpp"

namespace testing {

using pfeddl::Index;
using pfeddl::Matrix;
using pfeddl::Vector;

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Matrix unit_columns(Index rows, Index cols, std::mt19937_64& rng) {
  Matrix m = gaussian(rows, cols, rng);
  for (Index j = 0; j < cols; ++j) m.col(j).normalize();
  return m;
}

inline std::vector<int> random_labels(Index n, std::mt19937_64& rng) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<int>(rng() & 1u);
  return y;
}

// Central differences of f at x, entry by entry.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                               double h = 1e-6) {
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double keep = probe(i, j);
      probe(i, j) = keep + h;
      const double up = f(probe);
      probe(i, j) = keep - h;
      const double down = f(probe);
      probe(i, j) = keep;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

inline double relative_error(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.norm(), 1e-12);
  return (got - want).norm() / scale;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pfeddl_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing

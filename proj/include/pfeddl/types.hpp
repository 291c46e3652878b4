#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfeddl/error.hpp"

namespace pfeddl {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// d x n, one sample per column.
using DataMatrix = Matrix;

/// k x n coefficients over a dictionary's atoms.
using SparseCode = Matrix;

using Rng = std::mt19937_64;

/// Independent generator for sub-stream `stream` of a run seeded with `seed`.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Binary diagnosis labels, every entry exactly 0 or 1.
class Labels {
 public:
  Labels() = default;
  explicit Labels(std::vector<int> values);

  Index size() const noexcept { return static_cast<Index>(values_.size()); }
  int operator[](Index i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& values() const noexcept { return values_; }

  /// Labels as a real vector, for loss and gradient arithmetic.
  Vector as_real() const;

  Labels subset(const std::vector<Index>& indices) const;

  friend bool operator==(const Labels&, const Labels&) = default;

 private:
  std::vector<int> values_;
};

/// d x k matrix of atoms. Columns [0, global_count) form the global block
/// shared through federation, columns [global_count, k) the site-local block.
struct Dictionary {
  Matrix atoms;
  Index global_count = 0;

  Dictionary() = default;
  Dictionary(Matrix values, Index global_count);

  Index dim() const noexcept { return atoms.rows(); }
  Index atom_count() const noexcept { return atoms.cols(); }
  Index local_count() const noexcept { return atoms.cols() - global_count; }

  auto global_block() const { return atoms.leftCols(global_count); }
  auto local_block() const { return atoms.rightCols(local_count()); }
};

struct ClassifierWeights {
  Vector w;
  double b = 0.0;

  static ClassifierWeights zeros(Index k) { return {Vector::Zero(k), 0.0}; }
};

struct Hyperparams {
  double lambda1 = 1.0;    // reconstruction weight
  double lambda2 = 0.005;  // code sparsity
  double lambda3 = 1.5;    // classifier ridge
  double lambda4 = 0.01;   // dictionary orthogonality
  double eta = 1e-4;
  Index k = 400;
  Index g = 370;
  int iters_local = 5;
  int iters_fed = 100;
  int iters_pretrain = 200;
  std::uint64_t seed = 0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// One site's private training data.
struct SiteInput {
  DataMatrix X;
  Labels Y;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ShapeError(message);
}

std::string shape_str(const Matrix& m);

bool all_finite(const Matrix& m);

}  // namespace detail

}  // namespace pfeddl

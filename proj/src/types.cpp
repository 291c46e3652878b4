#include "pfeddl/types.hpp"

#include <cmath>
#include <sstream>

namespace pfeddl {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

Labels::Labels(std::vector<int> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] != 0 && values_[i] != 1) {
      throw InvalidArgumentError("label " + std::to_string(i) + " is " +
                                 std::to_string(values_[i]) + ", expected 0 or 1");
    }
  }
}

Vector Labels::as_real() const {
  Vector out(size());
  for (Index i = 0; i < size(); ++i) out(i) = values_[static_cast<std::size_t>(i)];
  return out;
}

Labels Labels::subset(const std::vector<Index>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (Index i : indices) {
    if (i < 0 || i >= size()) throw ShapeError("label index out of range");
    out.push_back(values_[static_cast<std::size_t>(i)]);
  }
  return Labels(std::move(out));
}

Dictionary::Dictionary(Matrix values, Index global)
    : atoms(std::move(values)), global_count(global) {
  if (global_count < 0 || global_count > atoms.cols()) {
    throw ShapeError("global atom count " + std::to_string(global_count) +
                     " outside [0, " + std::to_string(atoms.cols()) + "]");
  }
}

void Hyperparams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid hyperparameters: " + what); };
  if (!(lambda1 >= 0) || !(lambda2 >= 0) || !(lambda3 >= 0) || !(lambda4 >= 0)) {
    fail("all lambdas must be nonnegative");
  }
  if (!(eta > 0) || !std::isfinite(eta)) fail("eta must be a positive finite number");
  if (k < 1) fail("k must be at least 1");
  if (g < 0 || g > k) fail("g must satisfy 0 <= g <= k (g=" + std::to_string(g) +
                           ", k=" + std::to_string(k) + ")");
  if (iters_local < 0 || iters_fed < 0 || iters_pretrain < 0) {
    fail("iteration counts must be nonnegative");
  }
}

namespace detail {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace detail

}  // namespace pfeddl

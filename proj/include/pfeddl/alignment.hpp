#pragma once

#include <utility>
#include <vector>

#include "pfeddl/types.hpp"

namespace pfeddl::align {

/// k x k matrix with exactly one +-1 per row and column, stored as the source
/// column and sign of every aligned position. Aligned column r of D P is
/// sign(r) * D.col(source(r)); aligned row r of P^T S is sign(r) * S.row(source(r)).
class SignedPermutation {
 public:
  SignedPermutation() = default;
  SignedPermutation(std::vector<Index> sources, std::vector<int> signs);

  static SignedPermutation identity(Index k);
  static SignedPermutation random(Index k, Rng& rng);

  Index size() const noexcept { return static_cast<Index>(sources_.size()); }
  Index source(Index position) const { return sources_.at(static_cast<std::size_t>(position)); }
  int sign(Index position) const { return signs_.at(static_cast<std::size_t>(position)); }
  const std::vector<Index>& sources() const noexcept { return sources_; }
  const std::vector<int>& signs() const noexcept { return signs_; }

  /// Dense form, P(source(r), r) = sign(r).
  Matrix matrix() const;

  /// P^T as a signed permutation.
  SignedPermutation inverse() const;

  /// (*this) followed by `next`: the matrix product P * next.
  SignedPermutation then(const SignedPermutation& next) const;

  /// D * P
  Matrix permute_columns(const Matrix& dict) const;
  /// P^T * S
  Matrix permute_rows(const Matrix& codes) const;

  friend bool operator==(const SignedPermutation&, const SignedPermutation&) = default;

 private:
  std::vector<Index> sources_;
  std::vector<int> signs_;
};

/// Returns (D P, P^T S).
std::pair<Dictionary, SparseCode> apply_signed_permutation(const Dictionary& dict,
                                                           const SparseCode& codes,
                                                           const SignedPermutation& perm);

struct EdgeWeight {
  double weight = 0.0;
  int sign = 1;
};

/// min(MSE(a, b), MSE(a, -b)) with MSE(u, v) = ||u - v||^2 / d. The sign is -1
/// only when the negated pairing is strictly closer.
EdgeWeight atom_edge_weight(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Layered graph s -> site 0 -> ... -> site N-1 -> t over each site's atoms.
/// Edge tables between consecutive sites are computed once; selected atoms
/// are removed by masking.
class AlignmentGraph {
 public:
  explicit AlignmentGraph(const std::vector<Matrix>& dictionaries);

  Index site_count() const noexcept { return static_cast<Index>(alive_.size()); }
  Index atom_count() const noexcept { return atom_count_; }

  bool alive(Index site, Index atom) const;
  void remove(Index site, Index atom);
  std::vector<Index> surviving(Index site) const;
  Index surviving_count(Index site) const;

  /// Edge from atom `from` at `site` to atom `to` at `site + 1`.
  const EdgeWeight& edge(Index site, Index from, Index to) const;

 private:
  Index atom_count_ = 0;
  std::vector<std::vector<EdgeWeight>> tables_;  // per site pair, row-major k x k
  std::vector<std::vector<char>> alive_;
};

struct PathStep {
  Index atom = 0;
  int sign = 1;  // cumulative sign relative to the site-0 atom
};

struct AlignmentPath {
  std::vector<PathStep> steps;  // one per site
  double weight = 0.0;
};

/// Minimum-weight s -> t path visiting one surviving atom per site, found with
/// Dijkstra's algorithm. Source and sink edges weigh zero. Among equal-weight
/// paths the lexicographically smallest atom sequence wins.
AlignmentPath shortest_alignment_path(const AlignmentGraph& graph);

struct AlignmentRecord {
  std::vector<AlignmentPath> rounds;

  double total_weight() const;
};

struct AlignmentResult {
  std::vector<Dictionary> dictionaries;
  std::vector<SparseCode> codes;
  std::vector<SignedPermutation> permutations;
  AlignmentRecord record;
};

/// k rounds of shortest_alignment_path, removing the selected atoms after each
/// round. Aligned position r holds round r's atoms; D_A = D P and S_A = P^T S
/// per site. Global counts are carried over from the inputs.
AlignmentResult global_alignment(const std::vector<Dictionary>& dictionaries,
                                 const std::vector<SparseCode>& codes);

}  // namespace pfeddl::align

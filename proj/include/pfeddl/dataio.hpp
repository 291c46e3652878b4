#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pfeddl/types.hpp"

namespace pfeddl::io {

/// Parameters of a planted non-IID federation.
struct SyntheticSpec {
  Index d = 64;
  Index k_true = 16;
  Index g_true = 10;
  Index sites = 4;
  std::vector<Index> samples_per_site{150, 150, 150, 150};
  Index sparsity = 3;       // nonzeros per code column
  double noise_std = 0.01;
  double margin = 0.1;      // minimum |planted score| of every sample
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Matrix global_atoms;                     // d x g_true, shared by every site
  std::vector<Matrix> local_atoms;         // per site, d x (k_true - g_true)
  std::vector<SparseCode> codes;           // per site, k_true x n_i
  std::vector<Vector> classifier_directions;  // per site, unit k_true-vector

  /// [global_atoms, local_atoms[site]]
  Matrix site_dictionary(std::size_t site) const;
};

struct SyntheticFederation {
  std::vector<SiteInput> sites;
  GroundTruth truth;
};

/// Draws shared global atoms once and local atoms per site. Each code column
/// has `sparsity` random atoms with coefficients +-[0.5, 1.5). Each site has a
/// planted classifier direction over the global atoms; a sample is redrawn
/// until |direction^T code| >= margin and labeled 1 when the score is
/// positive. Deterministic in spec.seed.
SyntheticFederation generate_synthetic_federation(const SyntheticSpec& spec);

/// Pearson correlation between ROI rows, clamped to [-1+1e-7, 1-1e-7],
/// Fisher z-transformed and vectorized over the strict lower triangle.
Vector pearson_fisher_features(const Matrix& timeseries);

/// Strict lower triangle, column-stacked: (1,0), (2,0), ..., (m-1,0), (2,1), ...
Vector vectorize_lower_triangle(const Matrix& symmetric);

/// Inverse of vectorize_lower_triangle: symmetric, zero diagonal.
Matrix devectorize_lower_triangle(const Vector& features, Index roi_count);

/// m with m(m-1)/2 == length, if one exists.
std::optional<Index> roi_count_for_length(Index length);

// Matrix text format: a `rows cols` header line, then one line per row with
// `cols` space-separated decimals. Values are written in shortest round-trip
// form, so save/load is exact.

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

// Labels: one integer, 0 or 1, per line.

void write_labels(std::ostream& out, const Labels& labels);
Labels read_labels(std::istream& in);
void save_labels(const std::filesystem::path& path, const Labels& labels);
Labels load_labels(const std::filesystem::path& path);

/// Loads a site directory: either X.txt + Y.txt, or timeseries_*.txt files
/// (m x T each, processed in lexicographic filename order into feature
/// columns) together with Y.txt listing labels in the same order.
SiteInput load_site_directory(const std::filesystem::path& dir);

/// Ground truth as matrix files: global_atoms.txt plus, per site i,
/// local_atoms_<i>.txt, codes_<i>.txt and direction_<i>.txt (k x 1).
void save_ground_truth(const std::filesystem::path& dir, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::filesystem::path& dir);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace pfeddl::io

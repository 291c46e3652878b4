#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pfeddl/alignment.hpp"
#include "pfeddl/dataio.hpp"
#include "pfeddl/federation.hpp"
#include "pfeddl/types.hpp"

namespace pfeddl::eval {

struct Fold {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// folds[site][f]
struct FoldSplit {
  std::vector<std::vector<Fold>> sites;
};

/// Seeded shuffle of each site's samples into `folds` parts whose sizes differ
/// by at most one; the first n % folds parts get the extra sample.
FoldSplit kfold_split(const std::vector<Index>& n_per_site, int folds, std::uint64_t seed);

struct EncodeOptions {
  double tolerance = 1e-6;
  int max_iters = 500;
};

/// Fixed-dictionary ISTA from zero codes for
///   lambda1/2 ||X - DS||^2 + lambda2 ||S||_1,
/// stopping when ||S_t - S_{t-1}||_F / ||S_t||_F < tolerance.
SparseCode encode_test_samples(const Dictionary& dict, const DataMatrix& data,
                               const Hyperparams& hyper, const EncodeOptions& options = {});

/// 1 where w^T s + b >= 0 (sigmoid >= 0.5), else 0.
Labels predict(const ClassifierWeights& weights, const SparseCode& codes);

double accuracy(const Labels& predicted, const Labels& truth);

enum class RoiSign { Absolute, Signed };

/// Number of ROIs m behind connectivity vectors of length m(m-1)/2.
struct RoiCount {
  Index value = 0;
};

struct RoiImportance {
  Vector scores;                 // per ROI, nonnegative
  std::vector<Index> top_rois;   // by descending score, ties to the lower index
  std::vector<Index> top_atoms;  // by descending |w_j|, ties to the lower index
};

/// Scores ROIs by the connectivity of the `top_atoms` atoms with largest |w_j|:
///   Absolute: score[r] = sum_j |w_j| sum_{o != r} |M_j(r, o)|
///   Signed:   score[r] = | sum_j w_j sum_{o != r} M_j(r, o) |
/// where M_j is atom j devectorized to an m x m connectivity matrix.
RoiImportance roi_importance(const Dictionary& dict, const ClassifierWeights& weights,
                             RoiCount roi_count, Index top_atoms = 10, Index top_rois = 10,
                             RoiSign sign = RoiSign::Absolute);

/// Same, with the ROI count inferred from the atom dimension.
RoiImportance roi_importance(const Dictionary& dict, const ClassifierWeights& weights,
                             Index top_atoms = 10, Index top_rois = 10,
                             RoiSign sign = RoiSign::Absolute);

/// Maximum-weight one-to-one assignment of rows to columns (rows <= cols).
/// Returns the column assigned to each row.
std::vector<Index> max_weight_assignment(const Matrix& weights);

/// Mean |cosine| between each planted atom and its assigned learned atom,
/// under the assignment maximizing the total |cosine|.
double atom_recovery(const Matrix& learned, const Matrix& planted);

struct ExperimentConfig {
  std::vector<SiteInput> sites;
  std::vector<std::string> site_names;
  std::optional<io::GroundTruth> truth;
  Hyperparams hyper;
  int folds = 4;
  fed::RunOptions run_options;
  RoiSign roi_sign = RoiSign::Absolute;
  Index top_atoms = 10;
  Index top_rois = 10;
  /// Per-round progress; fold is -1 for the final run on all data.
  std::function<void(int fold, const fed::RoundReport&)> on_round;
};

struct FoldResult {
  int fold = 0;
  std::vector<double> site_accuracy;
  double mean_accuracy = 0.0;
  std::vector<fed::RoundReport> rounds;
};

struct SiteSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;
};

struct FederationReport {
  Hyperparams hyper;
  int folds = 0;
  std::vector<FoldResult> fold_results;
  std::vector<SiteSummary> sites;
  double average_mean = 0.0;  // mean over folds of the per-fold site average
  double average_std = 0.0;

  // From the run on all data.
  std::vector<fed::RoundReport> full_rounds;
  align::AlignmentRecord alignment;
  std::vector<align::SignedPermutation> permutations;
  std::vector<fed::ClientState> final_clients;
  std::vector<std::optional<RoiImportance>> roi;  // per site, when atoms are connectivity vectors
  std::optional<double> global_atom_recovery;     // when ground truth is known
  std::vector<std::string> warnings;
  bool success = true;
};

/// Cross-validated PFedDL: per fold, trains on the training parts of every
/// site, encodes each site's held-out samples with that site's dictionary and
/// scores them with its classifier. A final run on all data provides model
/// files, ROI importance and planted-atom recovery.
FederationReport run_experiment(const ExperimentConfig& config);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(const std::vector<double>& values);

}  // namespace pfeddl::eval

#pragma once

#include <string>
#include <vector>

#include "pfeddl/types.hpp"

// Per-site dictionary-learning update rules.
//
// Gradient conventions. Each update is a plain (proximal) gradient step on a
// generating function; the step directions below are exact gradients of:
//
//   update_codes_unsupervised  1/2 ||X - DS||_F^2                    (w.r.t. S)
//   update_dictionary          r/2 ||X - DS||_F^2 + l/4 ||D^T D - I||_F^2
//                              with r = recon_weight, l = lam_orth    (w.r.t. D)
//   update_classifier          L(Y,S,w) + lam3/2 ||w||^2              (w.r.t. w, b)
//   update_codes_supervised    L(Y,S,w) + lambda1/2 ||X - DS||_F^2    (w.r.t. S)
//
// objective_site reports the unhalved sum
//   L + lambda1 ||X-DS||^2 + lambda2 ||S||_1 + lambda3 ||w||^2 + lambda4 ||D^T D - I||^2.

namespace pfeddl::dl {

double soft_threshold(double x, double lam);

/// Elementwise soft threshold.
Matrix soft_threshold(const Matrix& values, double lam);

/// ISTA step: SoftThreshold(S - eta * D^T (D S - X), eps).
SparseCode update_codes_unsupervised(const Dictionary& dict, const SparseCode& codes,
                                     const DataMatrix& data, double eta, double eps);

/// D - eta * (recon_weight * (D S - X) S^T + lam_orth * D (D^T D - I)).
/// Does not normalize.
Dictionary update_dictionary(const Dictionary& dict, const SparseCode& codes,
                             const DataMatrix& data, double eta, double lam_orth,
                             double recon_weight = 1.0);

/// Rescales every column to unit Euclidean norm. A zero column is replaced by
/// a fresh random unit vector drawn from `rng` and a message is appended to
/// `warnings` when it is non-null.
Dictionary normalize_columns(const Dictionary& dict, Rng& rng,
                             std::vector<std::string>* warnings = nullptr);

/// Logistic function, evaluated without overflow for large |z|.
double sigmoid(double z);

/// Mean binary cross-entropy of sigmoid(w^T s_a + b) against y_a.
double classification_loss(const Labels& labels, const SparseCode& codes,
                           const ClassifierWeights& weights);

struct LossGradient {
  Vector dw;
  double db = 0.0;
  Matrix dcodes;
};

/// Gradients of classification_loss w.r.t. w, b and the codes.
LossGradient classification_gradient(const Labels& labels, const SparseCode& codes,
                                     const ClassifierWeights& weights);

/// w <- w - eta (dL/dw + lam3 w), b <- b - eta dL/db. The bias is not penalized.
ClassifierWeights update_classifier(const ClassifierWeights& weights, const Labels& labels,
                                    const SparseCode& codes, double eta, double lam3);

/// SoftThreshold(S - eta (dL/dS + lambda1 D^T (D S - X)), eta * lambda2).
SparseCode update_codes_supervised(const SparseCode& codes, const Dictionary& dict,
                                   const DataMatrix& data, const Labels& labels,
                                   const ClassifierWeights& weights, const Hyperparams& hyper);

double objective_site(const DataMatrix& data, const Labels& labels, const Dictionary& dict,
                      const SparseCode& codes, const ClassifierWeights& weights,
                      const Hyperparams& hyper);

/// 1/2 ||X - DS||_F^2 + lambda2 ||S||_1 + lambda4/4 ||D^T D - I||_F^2, the
/// function whose gradients the code and dictionary updates take.
double pretrain_objective(const DataMatrix& data, const Dictionary& dict,
                          const SparseCode& codes, const Hyperparams& hyper);

struct PretrainResult {
  Dictionary dictionary;
  SparseCode codes;
  /// pretrain_objective at initialization followed by one value per iteration.
  std::vector<double> objective_trace;
  std::vector<std::string> warnings;
};

/// Unsupervised dictionary learning from a seeded Gaussian initialization with
/// zero codes. Alternates code step, dictionary step and column normalization
/// for hyper.iters_pretrain iterations, using step sizes set from the current
/// Lipschitz constants of each block.
PretrainResult pretrain_local(const DataMatrix& data, const Hyperparams& hyper, Rng& rng);

/// Same, seeded from hyper.seed.
PretrainResult pretrain_local(const DataMatrix& data, const Hyperparams& hyper);

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double spectral_norm_sq(const Matrix& gram);

}  // namespace pfeddl::dl

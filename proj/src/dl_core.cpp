#include "pfeddl/dl_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pfeddl::dl {
namespace {

constexpr double kProbClamp = 1e-12;

void check_triple(const Dictionary& dict, const SparseCode& codes, const DataMatrix& data,
                  const char* op) {
  using detail::shape_str;
  detail::require(dict.atom_count() == codes.rows() && dict.dim() == data.rows() &&
                      codes.cols() == data.cols(),
                  std::string(op) + ": inconsistent shapes D " + shape_str(dict.atoms) + ", S " +
                      shape_str(codes) + ", X " + shape_str(data));
}

void check_classifier(const Labels& labels, const SparseCode& codes,
                      const ClassifierWeights& weights, const char* op) {
  detail::require(labels.size() == codes.cols(),
                  std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(codes.cols()) + " code columns");
  detail::require(weights.w.size() == codes.rows(),
                  std::string(op) + ": classifier has " + std::to_string(weights.w.size()) +
                      " weights for " + std::to_string(codes.rows()) + " atoms");
}

Vector margins(const SparseCode& codes, const ClassifierWeights& weights) {
  Vector z = codes.transpose() * weights.w;
  z.array() += weights.b;
  return z;
}

}  // namespace

double soft_threshold(double x, double lam) {
  const double mag = std::abs(x) - lam;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

Matrix soft_threshold(const Matrix& values, double lam) {
  return values.unaryExpr([lam](double x) { return soft_threshold(x, lam); });
}

SparseCode update_codes_unsupervised(const Dictionary& dict, const SparseCode& codes,
                                     const DataMatrix& data, double eta, double eps) {
  check_triple(dict, codes, data, "update_codes_unsupervised");
  const Matrix& D = dict.atoms;
  const Matrix residual = D * codes - data;
  return soft_threshold(codes - eta * (D.transpose() * residual), eps);
}

Dictionary update_dictionary(const Dictionary& dict, const SparseCode& codes,
                             const DataMatrix& data, double eta, double lam_orth,
                             double recon_weight) {
  check_triple(dict, codes, data, "update_dictionary");
  const Matrix& D = dict.atoms;
  const Index k = D.cols();
  Matrix grad = recon_weight * ((D * codes - data) * codes.transpose());
  if (lam_orth != 0.0) {
    const Matrix gram_dev = D.transpose() * D - Matrix::Identity(k, k);
    grad += lam_orth * (D * gram_dev);
  }
  return Dictionary(D - eta * grad, dict.global_count);
}

Dictionary normalize_columns(const Dictionary& dict, Rng& rng, std::vector<std::string>* warnings) {
  Dictionary out = dict;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < out.atoms.cols(); ++j) {
    auto col = out.atoms.col(j);
    double norm = col.norm();
    if (norm == 0.0 || !std::isfinite(norm)) {
      for (Index i = 0; i < col.size(); ++i) col(i) = normal(rng);
      norm = col.norm();
      if (warnings) {
        warnings->push_back("atom " + std::to_string(j) +
                            " collapsed to zero; replaced with a random unit vector");
      }
    }
    col /= norm;
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double classification_loss(const Labels& labels, const SparseCode& codes,
                           const ClassifierWeights& weights) {
  check_classifier(labels, codes, weights, "classification_loss");
  const Index n = codes.cols();
  if (n == 0) return 0.0;
  const Vector z = margins(codes, weights);
  double total = 0.0;
  for (Index a = 0; a < n; ++a) {
    const double p = std::clamp(sigmoid(z(a)), kProbClamp, 1.0 - kProbClamp);
    total += labels[a] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(n);
}

LossGradient classification_gradient(const Labels& labels, const SparseCode& codes,
                                     const ClassifierWeights& weights) {
  check_classifier(labels, codes, weights, "classification_gradient");
  const Index n = codes.cols();
  LossGradient grad{Vector::Zero(codes.rows()), 0.0, Matrix::Zero(codes.rows(), n)};
  if (n == 0) return grad;
  const Vector z = margins(codes, weights);
  Vector err(n);
  for (Index a = 0; a < n; ++a) err(a) = sigmoid(z(a)) - labels[a];
  err /= static_cast<double>(n);
  grad.dw = codes * err;
  grad.db = err.sum();
  grad.dcodes = weights.w * err.transpose();
  return grad;
}

ClassifierWeights update_classifier(const ClassifierWeights& weights, const Labels& labels,
                                    const SparseCode& codes, double eta, double lam3) {
  const LossGradient grad = classification_gradient(labels, codes, weights);
  ClassifierWeights out;
  out.w = weights.w - eta * (grad.dw + lam3 * weights.w);
  out.b = weights.b - eta * grad.db;
  return out;
}

SparseCode update_codes_supervised(const SparseCode& codes, const Dictionary& dict,
                                   const DataMatrix& data, const Labels& labels,
                                   const ClassifierWeights& weights, const Hyperparams& hyper) {
  check_triple(dict, codes, data, "update_codes_supervised");
  const LossGradient grad = classification_gradient(labels, codes, weights);
  const Matrix& D = dict.atoms;
  const Matrix recon = D.transpose() * (D * codes - data);
  return soft_threshold(codes - hyper.eta * (grad.dcodes + hyper.lambda1 * recon),
                        hyper.eta * hyper.lambda2);
}

double objective_site(const DataMatrix& data, const Labels& labels, const Dictionary& dict,
                      const SparseCode& codes, const ClassifierWeights& weights,
                      const Hyperparams& hyper) {
  check_triple(dict, codes, data, "objective_site");
  const Matrix& D = dict.atoms;
  const Index k = D.cols();
  const double loss = classification_loss(labels, codes, weights);
  const double recon = (data - D * codes).squaredNorm();
  const double l1 = codes.cwiseAbs().sum();
  const double ridge = weights.w.squaredNorm();
  const double orth = (D.transpose() * D - Matrix::Identity(k, k)).squaredNorm();
  return loss + hyper.lambda1 * recon + hyper.lambda2 * l1 + hyper.lambda3 * ridge +
         hyper.lambda4 * orth;
}

double pretrain_objective(const DataMatrix& data, const Dictionary& dict, const SparseCode& codes,
                          const Hyperparams& hyper) {
  check_triple(dict, codes, data, "pretrain_objective");
  const Matrix& D = dict.atoms;
  const Index k = D.cols();
  const double orth = (D.transpose() * D - Matrix::Identity(k, k)).squaredNorm();
  return 0.5 * (data - D * codes).squaredNorm() + hyper.lambda2 * codes.cwiseAbs().sum() +
         0.25 * hyper.lambda4 * orth;
}

double spectral_norm_sq(const Matrix& gram) {
  if (gram.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

PretrainResult pretrain_local(const DataMatrix& data, const Hyperparams& hyper, Rng& rng) {
  hyper.validate();
  if (data.cols() < 1 || data.rows() < 1) {
    throw ShapeError("pretrain_local: data must have at least one row and one column, got " +
                     detail::shape_str(data));
  }
  const Index d = data.rows();
  const Index k = hyper.k;
  const Index n = data.cols();

  PretrainResult result;
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix init(d, k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < d; ++i) init(i, j) = normal(rng);
  }
  Dictionary dict = normalize_columns(Dictionary(std::move(init), hyper.g), rng, &result.warnings);
  SparseCode codes = SparseCode::Zero(k, n);
  result.objective_trace.reserve(static_cast<std::size_t>(hyper.iters_pretrain) + 1);
  result.objective_trace.push_back(pretrain_objective(data, dict, codes, hyper));

  constexpr double kTiny = 1e-12;
  for (int it = 0; it < hyper.iters_pretrain; ++it) {
    const double code_lip = spectral_norm_sq(dict.atoms.transpose() * dict.atoms);
    const double code_step = 1.0 / std::max(code_lip, kTiny);
    codes = update_codes_unsupervised(dict, codes, data, code_step, code_step * hyper.lambda2);

    const double dict_lip = spectral_norm_sq(codes * codes.transpose()) +
                            hyper.lambda4 * (3.0 * code_lip + 1.0);
    const double dict_step = 1.0 / std::max(dict_lip, kTiny);
    dict = update_dictionary(dict, codes, data, dict_step, hyper.lambda4);
    dict = normalize_columns(dict, rng, &result.warnings);

    result.objective_trace.push_back(pretrain_objective(data, dict, codes, hyper));
  }
  result.dictionary = std::move(dict);
  result.codes = std::move(codes);
  return result;
}

PretrainResult pretrain_local(const DataMatrix& data, const Hyperparams& hyper) {
  Rng rng = make_rng(hyper.seed);
  return pretrain_local(data, hyper, rng);
}

}  // namespace pfeddl::dl

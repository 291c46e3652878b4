#include "pfeddl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pfeddl/dl_core.hpp"

namespace pfeddl::eval {
namespace {

std::vector<Index> ranked_desc(const Vector& values, Index limit) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });
  order.resize(static_cast<std::size_t>(std::min<Index>(limit, values.size())));
  return order;
}

fed::RunOptions options_for(const ExperimentConfig& config, int fold) {
  fed::RunOptions options = config.run_options;
  if (config.on_round) {
    options.on_round = [&config, fold](const fed::RoundReport& r) { config.on_round(fold, r); };
  }
  return options;
}

}  // namespace

FoldSplit kfold_split(const std::vector<Index>& n_per_site, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("kfold_split: need at least 2 folds to hold out data, got " + std::to_string(folds));
  FoldSplit split;
  for (std::size_t site = 0; site < n_per_site.size(); ++site) {
    const Index n = n_per_site[site];
    if (n < folds) {
      throw ConfigError("kfold_split: site " + std::to_string(site) + " has " + std::to_string(n) +
                        " samples, fewer than " + std::to_string(folds) + " folds");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(seed, 0xf01du + site);
    for (Index i = n - 1; i > 0; --i) {
      const Index j = std::uniform_int_distribution<Index>(0, i)(rng);
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    std::vector<std::vector<Index>> parts(static_cast<std::size_t>(folds));
    const Index base = n / folds;
    const Index extra = n % folds;
    Index pos = 0;
    for (int f = 0; f < folds; ++f) {
      const Index len = base + (f < extra ? 1 : 0);
      parts[static_cast<std::size_t>(f)].assign(order.begin() + pos, order.begin() + pos + len);
      std::sort(parts[static_cast<std::size_t>(f)].begin(), parts[static_cast<std::size_t>(f)].end());
      pos += len;
    }

    std::vector<Fold> site_folds;
    for (int f = 0; f < folds; ++f) {
      Fold fold;
      fold.test = parts[static_cast<std::size_t>(f)];
      for (int o = 0; o < folds; ++o) {
        if (o == f) continue;
        fold.train.insert(fold.train.end(), parts[static_cast<std::size_t>(o)].begin(),
                          parts[static_cast<std::size_t>(o)].end());
      }
      std::sort(fold.train.begin(), fold.train.end());
      site_folds.push_back(std::move(fold));
    }
    split.sites.push_back(std::move(site_folds));
  }
  return split;
}

SparseCode encode_test_samples(const Dictionary& dict, const DataMatrix& data,
                               const Hyperparams& hyper, const EncodeOptions& options) {
  detail::require(dict.dim() == data.rows(),
                  "encode_test_samples: dictionary " + detail::shape_str(dict.atoms) +
                      " cannot encode data " + detail::shape_str(data));
  SparseCode codes = SparseCode::Zero(dict.atom_count(), data.cols());
  if (data.cols() == 0 || dict.atom_count() == 0 || hyper.lambda1 == 0.0) return codes;

  // Minimizing lambda1/2 ||X-DS||^2 + lambda2 ||S||_1 is the same as
  // 1/2 ||X-DS||^2 + (lambda2/lambda1) ||S||_1; the fixed point does not
  // depend on the step, so take the largest stable one.
  const double lip = dl::spectral_norm_sq(dict.atoms.transpose() * dict.atoms);
  const double step = 1.0 / std::max(lip, 1e-12);
  const double threshold = step * hyper.lambda2 / hyper.lambda1;
  for (int it = 0; it < options.max_iters; ++it) {
    SparseCode next = dl::update_codes_unsupervised(dict, codes, data, step, threshold);
    const double change = (next - codes).norm();
    const double scale = next.norm();
    codes = std::move(next);
    if (scale == 0.0 ? change == 0.0 : change / scale < options.tolerance) break;
  }
  return codes;
}

Labels predict(const ClassifierWeights& weights, const SparseCode& codes) {
  detail::require(weights.w.size() == codes.rows(),
                  "predict: classifier has " + std::to_string(weights.w.size()) +
                      " weights for codes " + detail::shape_str(codes));
  std::vector<int> out(static_cast<std::size_t>(codes.cols()));
  for (Index a = 0; a < codes.cols(); ++a) {
    const double z = weights.w.dot(codes.col(a)) + weights.b;
    out[static_cast<std::size_t>(a)] = z >= 0.0 ? 1 : 0;
  }
  return Labels(std::move(out));
}

double accuracy(const Labels& predicted, const Labels& truth) {
  detail::require(predicted.size() == truth.size(),
                  "accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                      std::to_string(truth.size()) + " labels");
  if (truth.size() == 0) throw InvalidArgumentError("accuracy: no samples");
  Index hits = 0;
  for (Index i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

RoiImportance roi_importance(const Dictionary& dict, const ClassifierWeights& weights,
                             RoiCount roi_count, Index top_atoms, Index top_rois, RoiSign sign) {
  const Index m = roi_count.value;
  detail::require(m >= 2 && dict.dim() == m * (m - 1) / 2,
                  "roi_importance: atom dimension " + std::to_string(dict.dim()) +
                      " is not m(m-1)/2 for m=" + std::to_string(m));
  detail::require(weights.w.size() == dict.atom_count(),
                  "roi_importance: " + std::to_string(weights.w.size()) + " weights for " +
                      std::to_string(dict.atom_count()) + " atoms");

  RoiImportance out;
  out.top_atoms = ranked_desc(weights.w.cwiseAbs(), top_atoms);
  // Plain loops so the summation order is fixed: atoms by rank, then ROIs.
  Vector acc = Vector::Zero(m);
  for (Index j : out.top_atoms) {
    const Matrix conn = io::devectorize_lower_triangle(dict.atoms.col(j), m);
    const double wj = weights.w(j);
    for (Index r = 0; r < m; ++r) {
      double strength = 0.0;
      for (Index o = 0; o < m; ++o) {
        if (o == r) continue;
        strength += sign == RoiSign::Absolute ? std::abs(conn(r, o)) : conn(r, o);
      }
      acc(r) += (sign == RoiSign::Absolute ? std::abs(wj) : wj) * strength;
    }
  }
  out.scores = sign == RoiSign::Absolute ? acc : Vector(acc.cwiseAbs());
  out.top_rois = ranked_desc(out.scores, top_rois);
  return out;
}

RoiImportance roi_importance(const Dictionary& dict, const ClassifierWeights& weights,
                             Index top_atoms, Index top_rois, RoiSign sign) {
  const auto m = io::roi_count_for_length(dict.dim());
  if (!m || *m < 2) {
    throw ShapeError("roi_importance: atom dimension " + std::to_string(dict.dim()) +
                     " is not m(m-1)/2 for any ROI count m");
  }
  return roi_importance(dict, weights, RoiCount{*m}, top_atoms, top_rois, sign);
}

std::vector<Index> max_weight_assignment(const Matrix& weights) {
  // Hungarian algorithm with potentials on cost = -weights (1-based internals).
  const Index n = weights.rows();
  const Index m = weights.cols();
  if (n > m) throw ShapeError("max_weight_assignment: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = -weights(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j) {
    if (p[static_cast<std::size_t>(j)] != 0) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  }
  return assignment;
}

double atom_recovery(const Matrix& learned, const Matrix& planted) {
  detail::require(learned.rows() == planted.rows(),
                  "atom_recovery: learned atoms " + detail::shape_str(learned) +
                      " vs planted " + detail::shape_str(planted));
  if (learned.cols() == 0 || planted.cols() == 0) return 0.0;
  Matrix a = learned;
  Matrix b = planted;
  for (Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    if (norm > 0.0) a.col(j) /= norm;
  }
  for (Index j = 0; j < b.cols(); ++j) b.col(j).normalize();
  Matrix cos = (b.transpose() * a).cwiseAbs();  // planted x learned
  if (cos.rows() > cos.cols()) cos.transposeInPlace();
  const auto assignment = max_weight_assignment(cos);
  double total = 0.0;
  for (Index r = 0; r < cos.rows(); ++r) total += cos(r, assignment[static_cast<std::size_t>(r)]);
  return total / static_cast<double>(cos.rows());
}

double stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

FederationReport run_experiment(const ExperimentConfig& config) {
  config.hyper.validate();
  if (config.folds < 2) {
    throw ConfigError("run_experiment: folds must be at least 2 to hold out data, got " +
                      std::to_string(config.folds));
  }
  if (config.sites.empty()) throw ConfigError("run_experiment: no sites");
  const std::size_t count = config.sites.size();
  std::vector<std::string> names = config.site_names;
  for (std::size_t i = names.size(); i < count; ++i) names.push_back("site_" + std::to_string(i));

  std::vector<Index> sizes;
  for (const auto& s : config.sites) sizes.push_back(s.X.cols());
  const FoldSplit split = kfold_split(sizes, config.folds, config.hyper.seed);

  FederationReport report;
  report.hyper = config.hyper;
  report.folds = config.folds;

  std::vector<std::vector<double>> per_site(count);
  std::vector<double> fold_means;
  for (int f = 0; f < config.folds; ++f) {
    std::vector<SiteInput> train(count);
    for (std::size_t i = 0; i < count; ++i) {
      const Fold& fold = split.sites[i][static_cast<std::size_t>(f)];
      train[i] = {config.sites[i].X(Eigen::all, fold.train), config.sites[i].Y.subset(fold.train)};
    }
    fed::FederationRun run;
    try {
      run = fed::run_pfeddl(train, config.hyper, options_for(config, f));
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }

    FoldResult result;
    result.fold = f;
    for (std::size_t i = 0; i < count; ++i) {
      const Fold& fold = split.sites[i][static_cast<std::size_t>(f)];
      const fed::ClientState& client = run.clients[i];
      const DataMatrix test_x = config.sites[i].X(Eigen::all, fold.test);
      const SparseCode test_codes = encode_test_samples(client.D, test_x, config.hyper);
      const double acc = accuracy(predict(client.w, test_codes), config.sites[i].Y.subset(fold.test));
      result.site_accuracy.push_back(acc);
      per_site[i].push_back(acc);
    }
    result.mean_accuracy = std::accumulate(result.site_accuracy.begin(), result.site_accuracy.end(), 0.0) /
                           static_cast<double>(count);
    fold_means.push_back(result.mean_accuracy);
    result.rounds = std::move(run.rounds);
    for (auto& w : run.warnings) report.warnings.push_back("fold " + std::to_string(f) + ": " + w);
    report.fold_results.push_back(std::move(result));
  }

  for (std::size_t i = 0; i < count; ++i) {
    const double mean = std::accumulate(per_site[i].begin(), per_site[i].end(), 0.0) /
                        static_cast<double>(per_site[i].size());
    report.sites.push_back({names[i], mean, stddev(per_site[i])});
  }
  report.average_mean = std::accumulate(fold_means.begin(), fold_means.end(), 0.0) /
                        static_cast<double>(fold_means.size());
  report.average_std = stddev(fold_means);

  fed::FederationRun full = fed::run_pfeddl(config.sites, config.hyper, options_for(config, -1));
  for (auto& w : full.warnings) report.warnings.push_back("full run: " + w);
  report.full_rounds = std::move(full.rounds);
  report.alignment = std::move(full.alignment.record);
  report.permutations = std::move(full.alignment.permutations);

  const auto m = io::roi_count_for_length(config.sites.front().X.rows());
  for (const auto& client : full.clients) {
    if (m && *m >= 2) {
      report.roi.push_back(roi_importance(client.D, client.w, RoiCount{*m}, config.top_atoms,
                                          config.top_rois, config.roi_sign));
    } else {
      report.roi.push_back(std::nullopt);
    }
  }
  if (config.truth && config.hyper.g > 0) {
    report.global_atom_recovery =
        atom_recovery(full.clients.front().D.global_block(), config.truth->global_atoms);
  }
  report.final_clients = std::move(full.clients);

  auto finite_rounds = [](const std::vector<fed::RoundReport>& rounds) {
    return std::all_of(rounds.begin(), rounds.end(), [](const fed::RoundReport& r) {
      return std::all_of(r.objective_post.begin(), r.objective_post.end(),
                         [](double v) { return std::isfinite(v); });
    });
  };
  report.success = std::isfinite(report.average_mean) && finite_rounds(report.full_rounds);
  for (const auto& f : report.fold_results) report.success = report.success && finite_rounds(f.rounds);
  return report;
}

}  // namespace pfeddl::eval

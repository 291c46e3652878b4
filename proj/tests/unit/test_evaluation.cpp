#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "pfeddl/dl_core.hpp"
#include "pfeddl/evaluation.hpp"
#include "pfeddl/profiles.hpp"
#include "support.hpp"

using namespace pfeddl;
using testing::gaussian;

namespace {

// Scores written straight from the definition: atoms by rank, then ROI r,
// then every other ROI o in increasing order.
Vector roi_oracle(const Matrix& atoms, const Vector& w, Index m, const std::vector<Index>& ranked, bool absolute) {
  Vector acc = Vector::Zero(m);
  for (Index j : ranked) {
    for (Index r = 0; r < m; ++r) {
      double strength = 0.0;
      for (Index o = 0; o < m; ++o) {
        if (o == r) continue;
        const Index hi = std::max(r, o), lo = std::min(r, o);
        // Position of (hi, lo) in the column-stacked strict lower triangle.
        const Index pos = lo * m - lo * (lo + 1) / 2 + (hi - lo - 1);
        strength += absolute ? std::abs(atoms(pos, j)) : atoms(pos, j);
      }
      acc(r) += (absolute ? std::abs(w(j)) : w(j)) * strength;
    }
  }
  return absolute ? acc : Vector(acc.cwiseAbs());
}

std::vector<Index> rank_by_abs(const Vector& w, Index limit) {
  std::vector<Index> idx(static_cast<std::size_t>(w.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(w(a)) > std::abs(w(b)); });
  idx.resize(static_cast<std::size_t>(std::min(limit, w.size())));
  return idx;
}

double brute_assignment(const Matrix& weights) {
  std::vector<Index> cols(static_cast<std::size_t>(weights.cols()));
  std::iota(cols.begin(), cols.end(), Index{0});
  double best = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index r = 0; r < weights.rows(); ++r) total += weights(r, cols[static_cast<std::size_t>(r)]);
    best = std::max(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("k-fold split") {
  const auto split = eval::kfold_split({10, 7, 4}, 4, 3);
  REQUIRE(split.sites.size() == 3);
  const std::vector<Index> n{10, 7, 4};
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<Index> all;
    for (int f = 0; f < 4; ++f) {
      const eval::Fold& fold = split.sites[s][static_cast<std::size_t>(f)];
      const Index want = n[s] / 4 + (f < n[s] % 4 ? 1 : 0);
      CHECK(static_cast<Index>(fold.test.size()) == want);
      CHECK(static_cast<Index>(fold.train.size()) == n[s] - want);
      std::set<Index> train(fold.train.begin(), fold.train.end());
      for (Index t : fold.test) CHECK_FALSE(train.count(t));
      all.insert(all.end(), fold.test.begin(), fold.test.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<Index> expect(static_cast<std::size_t>(n[s]));
    std::iota(expect.begin(), expect.end(), Index{0});
    CHECK(all == expect);
  }
  const auto again = eval::kfold_split({10, 7, 4}, 4, 3);
  CHECK(again.sites[0][0].test == split.sites[0][0].test);
  const auto other = eval::kfold_split({10, 7, 4}, 4, 4);
  bool differs = false;
  for (int f = 0; f < 4; ++f) differs = differs || other.sites[0][static_cast<std::size_t>(f)].test != split.sites[0][static_cast<std::size_t>(f)].test;
  CHECK(differs);

  CHECK_THROWS_AS(eval::kfold_split({10}, 1, 0), ConfigError);
  CHECK_THROWS_AS(eval::kfold_split({3}, 4, 0), ConfigError);
}

TEST_CASE("test-time encoding") {
  std::mt19937_64 g(1);
  Hyperparams h;
  SUBCASE("orthonormal atoms without sparsity project exactly") {
    const Matrix Q = Eigen::HouseholderQR<Matrix>(gaussian(6, 6, g)).householderQ();
    const Dictionary D(Q.leftCols(4), 0);
    const Matrix X = gaussian(6, 5, g);
    h.lambda2 = 0.0;
    CHECK((eval::encode_test_samples(D, X, h) - D.atoms.transpose() * X).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("orthonormal atoms with sparsity shrink the projection") {
    const Matrix Q = Eigen::HouseholderQR<Matrix>(gaussian(6, 6, g)).householderQ();
    const Dictionary D(Q.leftCols(4), 0);
    const Matrix X = gaussian(6, 5, g);
    h.lambda1 = 2.0;
    h.lambda2 = 0.3;
    const Matrix want = dl::soft_threshold(Matrix(D.atoms.transpose() * X), h.lambda2 / h.lambda1);
    CHECK((eval::encode_test_samples(D, X, h) - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("optimality conditions of the lasso") {
    const Dictionary D(testing::unit_columns(8, 5, g), 0);
    const Matrix X = gaussian(8, 6, g);
    h.lambda1 = 1.5;
    h.lambda2 = 0.2;
    const Matrix S = eval::encode_test_samples(D, X, h, {1e-13, 20000});
    const Matrix grad = h.lambda1 * D.atoms.transpose() * (X - D.atoms * S);
    for (Index j = 0; j < S.rows(); ++j) {
      for (Index a = 0; a < S.cols(); ++a) {
        if (S(j, a) == 0.0) {
          CHECK(std::abs(grad(j, a)) <= h.lambda2 + 1e-8);
        } else {
          CHECK(grad(j, a) == doctest::Approx(h.lambda2 * (S(j, a) > 0 ? 1.0 : -1.0)).epsilon(1e-6));
        }
      }
    }
  }
  SUBCASE("codes of planted data explain it") {
    const Dictionary D(testing::unit_columns(20, 6, g), 0);
    Matrix S0 = Matrix::Zero(6, 10);
    for (Index a = 0; a < 10; ++a) S0(a % 6, a) = 1.0;
    const Matrix X = D.atoms * S0;
    h.lambda2 = 1e-4;
    const Matrix S = eval::encode_test_samples(D, X, h, {1e-12, 5000});
    CHECK((X - D.atoms * S).norm() < 1e-2);
    CHECK((S - S0).cwiseAbs().maxCoeff() < 1e-2);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(eval::encode_test_samples(Dictionary(gaussian(5, 3, g), 0), gaussian(6, 2, g), h), ShapeError);
  }
}

TEST_CASE("predict and accuracy") {
  Matrix S(2, 3);
  S << 1, -1, 0,
       0, 0, 0;
  Vector w(2);
  w << 2.0, 5.0;
  CHECK(eval::predict({w, 0.0}, S) == Labels({1, 0, 1}));  // score 0 counts as positive
  CHECK(eval::predict({w, -3.0}, S) == Labels({0, 0, 0}));
  CHECK(eval::accuracy(Labels({1, 0, 1, 1}), Labels({1, 1, 1, 0})) == 0.5);
  CHECK_THROWS_AS(eval::accuracy(Labels({1}), Labels({1, 0})), ShapeError);
  CHECK_THROWS_AS(eval::accuracy(Labels(), Labels()), InvalidArgumentError);
  CHECK_THROWS_AS(eval::predict({Vector::Zero(3), 0.0}, S), ShapeError);
}

TEST_CASE("ROI importance matches the definition") {
  std::mt19937_64 g(2);
  for (int t = 0; t < 25; ++t) {
    const Index m = 4 + t % 4;
    const Index len = m * (m - 1) / 2;
    const Dictionary D(gaussian(len, 8, g), 3);
    const Vector w = gaussian(8, 1, g).col(0);
    for (bool absolute : {true, false}) {
      const auto got = eval::roi_importance(D, {w, 0.1}, eval::RoiCount{m}, 5, m, absolute ? eval::RoiSign::Absolute : eval::RoiSign::Signed);
      CHECK(got.top_atoms == rank_by_abs(w, 5));
      const Vector want = roi_oracle(D.atoms, w, m, rank_by_abs(w, 5), absolute);
      CHECK(got.scores == want);
      CHECK(static_cast<Index>(got.top_rois.size()) == m);
      for (std::size_t i = 1; i < got.top_rois.size(); ++i) {
        CHECK(got.scores(got.top_rois[i - 1]) >= got.scores(got.top_rois[i]));
      }
    }
  }
}

TEST_CASE("ROI importance special cases") {
  std::mt19937_64 g(3);
  SUBCASE("one edge") {
    // m = 4, only the (2, 0) entry is set.
    Matrix atoms = Matrix::Zero(6, 1);
    atoms(1, 0) = 0.5;
    Vector w(1);
    w << -2.0;
    const auto r = eval::roi_importance(Dictionary(atoms, 0), {w, 0.0}, eval::RoiCount{4}, 1, 4);
    Vector want(4);
    want << 1.0, 0.0, 1.0, 0.0;
    CHECK(r.scores == want);
    CHECK(r.top_rois == std::vector<Index>{0, 2, 1, 3});
  }
  SUBCASE("zero classifier") {
    const auto r = eval::roi_importance(Dictionary(gaussian(10, 4, g), 0), ClassifierWeights::zeros(4));
    CHECK(r.scores.isZero(0.0));
    CHECK(r.top_rois == std::vector<Index>{0, 1, 2, 3, 4});
  }
  SUBCASE("scaling, relabeling and sign flips") {
    const Matrix A = gaussian(10, 4, g);
    const Vector w = gaussian(4, 1, g).col(0);
    const auto base = eval::roi_importance(Dictionary(A, 0), {w, 0.0}, eval::RoiCount{5}, 4, 5);
    const auto scaled = eval::roi_importance(Dictionary(A, 0), {Vector(-3.0 * w), 0.0}, eval::RoiCount{5}, 4, 5);
    CHECK((scaled.scores - 3.0 * base.scores).cwiseAbs().maxCoeff() < 1e-12);

    Matrix Ap(10, 4);
    Vector wp(4);
    const std::vector<Index> perm{2, 0, 3, 1};
    for (Index j = 0; j < 4; ++j) {
      Ap.col(j) = -A.col(perm[static_cast<std::size_t>(j)]);
      wp(j) = -w(perm[static_cast<std::size_t>(j)]);
    }
    for (auto sign : {eval::RoiSign::Absolute, eval::RoiSign::Signed}) {
      const auto a = eval::roi_importance(Dictionary(A, 0), {w, 0.0}, eval::RoiCount{5}, 4, 5, sign);
      const auto b = eval::roi_importance(Dictionary(Ap, 0), {wp, 0.0}, eval::RoiCount{5}, 4, 5, sign);
      CHECK((a.scores - b.scores).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("atom length that is not a triangle") {
    CHECK_THROWS_AS(eval::roi_importance(Dictionary(gaussian(7, 2, g), 0), ClassifierWeights::zeros(2)), ShapeError);
    CHECK_THROWS_AS(eval::roi_importance(Dictionary(gaussian(6, 2, g), 0), ClassifierWeights::zeros(3)), ShapeError);
  }
}

TEST_CASE("assignment against exhaustive search") {
  std::mt19937_64 g(4);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int t = 0; t < 60; ++t) {
    const Index m = dim(g);
    const Index n = std::uniform_int_distribution<Index>(1, m)(g);
    Matrix w = gaussian(n, m, g);
    if (t % 3 == 0) w = w.array().round();  // ties
    const auto a = eval::max_weight_assignment(w);
    std::set<Index> used(a.begin(), a.end());
    CHECK(used.size() == static_cast<std::size_t>(n));
    double total = 0.0;
    for (Index r = 0; r < n; ++r) total += w(r, a[static_cast<std::size_t>(r)]);
    CHECK(total == doctest::Approx(brute_assignment(w)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(eval::max_weight_assignment(Matrix::Zero(3, 2)), ShapeError);
}

TEST_CASE("atom recovery") {
  std::mt19937_64 g(5);
  const Matrix P = testing::unit_columns(12, 5, g);
  CHECK(eval::atom_recovery(P, P) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix shuffled(12, 5);
  const std::vector<Index> order{3, 1, 4, 0, 2};
  for (Index j = 0; j < 5; ++j) shuffled.col(j) = (j % 2 ? -2.5 : 0.7) * P.col(order[static_cast<std::size_t>(j)]);
  CHECK(eval::atom_recovery(shuffled, P) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix E = Matrix::Identity(4, 4);
  CHECK(eval::atom_recovery(E.leftCols(2), E.rightCols(2)) == 0.0);
  // More learned atoms than planted ones.
  Matrix extra(12, 7);
  extra << P, testing::unit_columns(12, 2, g);
  CHECK(eval::atom_recovery(extra, P) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample standard deviation") {
  CHECK(eval::stddev({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(eval::stddev({7.0}) == 0.0);
  CHECK(eval::stddev({}) == 0.0);
  CHECK(eval::stddev({2.0, 2.0, 2.0}) == 0.0);
}

TEST_CASE("experiment configuration errors") {
  eval::ExperimentConfig cfg;
  cfg.sites = io::generate_synthetic_federation(profiles::quickstart_spec()).sites;
  cfg.hyper = profiles::quickstart_hyperparams();
  cfg.folds = 1;
  CHECK_THROWS_AS(eval::run_experiment(cfg), ConfigError);
  cfg.folds = 4;
  cfg.sites.clear();
  CHECK_THROWS_AS(eval::run_experiment(cfg), ConfigError);
}

TEST_CASE("shuffled labels give chance accuracy") {
  auto fedn = io::generate_synthetic_federation(profiles::quickstart_spec());
  std::mt19937_64 g(6);
  for (auto& s : fedn.sites) {
    std::vector<int> y = s.Y.values();
    std::shuffle(y.begin(), y.end(), g);
    s.Y = Labels(y);
  }
  eval::ExperimentConfig cfg;
  cfg.sites = fedn.sites;
  cfg.hyper = profiles::quickstart_hyperparams();
  int rounds_seen = 0;
  cfg.on_round = [&](int, const fed::RoundReport&) { ++rounds_seen; };
  const auto report = eval::run_experiment(cfg);
  CHECK(report.average_mean > 0.4);
  CHECK(report.average_mean < 0.6);
  CHECK(rounds_seen == 5 * cfg.hyper.iters_fed);
  CHECK_FALSE(report.global_atom_recovery.has_value());
  for (const auto& r : report.roi) CHECK_FALSE(r.has_value());  // 64 is not a triangle number
}

}  // TEST_SUITE

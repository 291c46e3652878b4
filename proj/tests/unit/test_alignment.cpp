#include <doctest.h>

#include <algorithm>
#include <functional>
#include <limits>

#include "pfeddl/alignment.hpp"
#include "support.hpp"

using namespace pfeddl;
using testing::gaussian;

namespace {

double mse_pair(const Vector& a, const Vector& b, int& sign) {
  double same = 0.0, flip = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    same += (a(i) - b(i)) * (a(i) - b(i));
    flip += (a(i) + b(i)) * (a(i) + b(i));
  }
  same /= static_cast<double>(a.size());
  flip /= static_cast<double>(a.size());
  sign = flip < same ? -1 : 1;
  return std::min(same, flip);
}

struct Brute {
  std::vector<Index> atoms;
  double weight = std::numeric_limits<double>::infinity();
};

// Enumerates every sequence of surviving atoms in lexicographic order; the
// first strict minimum wins.
Brute brute_force_path(const std::vector<Matrix>& dicts, const std::vector<std::vector<char>>& alive) {
  Brute best;
  std::vector<Index> seq(dicts.size());
  const Index k = dicts.front().cols();
  std::function<void(std::size_t)> walk = [&](std::size_t site) {
    if (site == dicts.size()) {
      double w = 0.0;
      for (std::size_t i = 1; i < dicts.size(); ++i) {
        int s = 1;
        w += mse_pair(dicts[i - 1].col(seq[i - 1]), dicts[i].col(seq[i]), s);
      }
      if (w < best.weight) best = {seq, w};
      return;
    }
    for (Index a = 0; a < k; ++a) {
      if (!alive[site][static_cast<std::size_t>(a)]) continue;
      seq[site] = a;
      walk(site + 1);
    }
  };
  walk(0);
  return best;
}

// Small integer entries make exact ties common.
Matrix coarse(Index d, Index k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> v(-1, 1);
  Matrix m(d, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < d; ++i) m(i, j) = v(rng);
  return m;
}

std::vector<Dictionary> planted_sites(const Matrix& base, const std::vector<align::SignedPermutation>& perms) {
  std::vector<Dictionary> out;
  for (const auto& p : perms) out.emplace_back(p.permute_columns(base), 0);
  return out;
}

}  // namespace

TEST_SUITE("alignment") {

TEST_CASE("edge weight") {
  Vector a(2), b(2);
  a << 1.0, 0.0;
  b << -1.0, 0.0;
  auto e = align::atom_edge_weight(a, b);
  CHECK(e.weight == 0.0);
  CHECK(e.sign == -1);

  b << 0.0, 1.0;
  e = align::atom_edge_weight(a, b);
  CHECK(e.weight == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(e.sign == 1);  // equal both ways, no flip

  e = align::atom_edge_weight(a, a);
  CHECK(e.weight == 0.0);
  CHECK(e.sign == 1);

  CHECK_THROWS_AS(align::atom_edge_weight(a, Vector::Zero(3)), ShapeError);
}

TEST_CASE("signed permutation basics") {
  Rng rng = make_rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto P = align::SignedPermutation::random(7, rng);
    const Matrix M = P.matrix();
    CHECK((M * M.transpose() - Matrix::Identity(7, 7)).isZero(0.0));
    CHECK(P.inverse().matrix() == M.transpose());
    CHECK(P.then(P.inverse()) == align::SignedPermutation::identity(7));

    std::mt19937_64 g(static_cast<unsigned>(t));
    const Matrix D = gaussian(5, 7, g), S = gaussian(7, 9, g);
    CHECK(P.permute_columns(D) == D * M);
    CHECK(P.permute_rows(S) == M.transpose() * S);
    auto [Dp, Sp] = align::apply_signed_permutation(Dictionary(D, 3), S, P);
    CHECK((Dp.atoms * Sp - D * S).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(Dp.global_count == 3);
    CHECK(P.inverse().permute_columns(Dp.atoms) == D);
  }
  CHECK_THROWS_AS(align::SignedPermutation({0, 0}, {1, 1}), InvalidArgumentError);
  CHECK_THROWS_AS(align::SignedPermutation({0, 2}, {1, 1}), InvalidArgumentError);
  CHECK_THROWS_AS(align::SignedPermutation({0, 1}, {1, 0}), InvalidArgumentError);
  CHECK_THROWS_AS(align::SignedPermutation({0, 1}, {1}), ShapeError);
}

TEST_CASE("shortest path matches exhaustive search in every round") {
  std::mt19937_64 g(2);
  std::uniform_int_distribution<int> kd(1, 4), nd(1, 3);
  int instances = 0;
  for (int t = 0; t < 50; ++t) {
    const Index k = kd(g);
    const int n = nd(g);
    const bool tie_heavy = t % 2 == 0;
    std::vector<Matrix> dicts;
    for (int i = 0; i < n; ++i) dicts.push_back(tie_heavy ? coarse(3, k, g) : gaussian(3, k, g));

    align::AlignmentGraph graph(dicts);
    std::vector<std::vector<char>> alive(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(k), 1));
    for (Index round = 0; round < k; ++round) {
      const Brute want = brute_force_path(dicts, alive);
      const align::AlignmentPath got = align::shortest_alignment_path(graph);
      REQUIRE(got.steps.size() == static_cast<std::size_t>(n));
      CHECK(got.weight == want.weight);
      int sign = 1;
      for (int i = 0; i < n; ++i) {
        CHECK(got.steps[static_cast<std::size_t>(i)].atom == want.atoms[static_cast<std::size_t>(i)]);
        if (i > 0) {
          int s = 1;
          mse_pair(dicts[static_cast<std::size_t>(i - 1)].col(want.atoms[static_cast<std::size_t>(i - 1)]),
                   dicts[static_cast<std::size_t>(i)].col(want.atoms[static_cast<std::size_t>(i)]), s);
          sign *= s;
        }
        CHECK(got.steps[static_cast<std::size_t>(i)].sign == sign);
        graph.remove(i, want.atoms[static_cast<std::size_t>(i)]);
        alive[static_cast<std::size_t>(i)][static_cast<std::size_t>(want.atoms[static_cast<std::size_t>(i)])] = 0;
      }
    }
    ++instances;
  }
  CHECK(instances == 50);
}

TEST_CASE("ties go to the lexicographically smallest path") {
  // Every atom is the same vector, so every path weighs zero.
  std::vector<Matrix> dicts(3, Matrix::Ones(2, 3));
  const std::vector<Dictionary> sites{Dictionary(dicts[0], 0), Dictionary(dicts[1], 0), Dictionary(dicts[2], 0)};
  const auto result = align::global_alignment(sites, std::vector<SparseCode>(3, Matrix::Zero(3, 1)));
  for (Index r = 0; r < 3; ++r) {
    for (const auto& step : result.record.rounds[static_cast<std::size_t>(r)].steps) CHECK(step.atom == r);
  }
}

TEST_CASE("a single site aligns to the identity") {
  std::mt19937_64 g(3);
  const Matrix D = gaussian(4, 5, g);
  const auto r = align::global_alignment({Dictionary(D, 2)}, {gaussian(5, 3, g)});
  CHECK(r.permutations[0] == align::SignedPermutation::identity(5));
  CHECK(r.dictionaries[0].atoms == D);
  CHECK(r.record.total_weight() == 0.0);
}

TEST_CASE("planted signed permutations are undone") {
  std::mt19937_64 g(4);
  Rng rng = make_rng(4);
  for (int t = 0; t < 5; ++t) {
    const Matrix base = testing::unit_columns(32, 8, g);
    std::vector<align::SignedPermutation> perms;
    for (int i = 0; i < 4; ++i) perms.push_back(align::SignedPermutation::random(8, rng));
    const auto sites = planted_sites(base, perms);
    const auto r = align::global_alignment(sites, std::vector<SparseCode>(4, Matrix::Zero(8, 2)));
    for (int i = 1; i < 4; ++i) {
      CHECK((r.dictionaries[static_cast<std::size_t>(i)].atoms - r.dictionaries[0].atoms).cwiseAbs().maxCoeff() < 1e-12);
    }
    for (const auto& round : r.record.rounds) CHECK(round.weight < 1e-20);
  }
}

TEST_CASE("identical sites") {
  std::mt19937_64 g(5);
  const Matrix D = gaussian(6, 4, g);
  const auto r = align::global_alignment({Dictionary(D, 0), Dictionary(D, 0)}, {Matrix::Zero(4, 1), Matrix::Zero(4, 1)});
  CHECK(r.permutations[0] == r.permutations[1]);
  CHECK(r.record.total_weight() == 0.0);
}

TEST_CASE("aligned factors are the inputs permuted") {
  std::mt19937_64 g(6);
  std::vector<Dictionary> dicts;
  std::vector<SparseCode> codes;
  for (int i = 0; i < 3; ++i) {
    dicts.emplace_back(gaussian(5, 4, g), 2);
    codes.push_back(gaussian(4, 7, g));
  }
  const auto r = align::global_alignment(dicts, codes);
  for (std::size_t i = 0; i < 3; ++i) {
    const Matrix P = r.permutations[i].matrix();
    CHECK(r.dictionaries[i].atoms == dicts[i].atoms * P);
    CHECK(r.codes[i] == P.transpose() * codes[i]);
    CHECK(r.dictionaries[i].global_count == 2);

    // Same atoms up to sign, each exactly once.
    std::vector<bool> used(4, false);
    for (Index c = 0; c < 4; ++c) {
      bool found = false;
      for (Index o = 0; o < 4 && !found; ++o) {
        if (used[static_cast<std::size_t>(o)]) continue;
        if (r.dictionaries[i].atoms.col(c) == dicts[i].atoms.col(o) ||
            r.dictionaries[i].atoms.col(c) == -dicts[i].atoms.col(o)) {
          used[static_cast<std::size_t>(o)] = found = true;
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("scaling every atom leaves the alignment unchanged") {
  std::mt19937_64 g(7);
  std::vector<Dictionary> dicts, scaled;
  for (int i = 0; i < 3; ++i) {
    const Matrix D = gaussian(5, 4, g);
    dicts.emplace_back(D, 0);
    scaled.emplace_back(4.0 * D, 0);
  }
  const std::vector<SparseCode> codes(3, Matrix::Zero(4, 1));
  const auto a = align::global_alignment(dicts, codes);
  const auto b = align::global_alignment(scaled, codes);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.permutations[i] == b.permutations[i]);
  CHECK(b.record.total_weight() == doctest::Approx(16.0 * a.record.total_weight()).epsilon(1e-12));
}

TEST_CASE("graph errors") {
  std::mt19937_64 g(8);
  align::AlignmentGraph graph({gaussian(3, 2, g), gaussian(3, 2, g)});
  graph.remove(1, 0);
  graph.remove(1, 1);
  CHECK_THROWS_AS(align::shortest_alignment_path(graph), InvalidStateError);
  CHECK_THROWS_AS(graph.remove(1, 1), InvalidStateError);
  CHECK_THROWS_AS(align::AlignmentGraph({gaussian(3, 2, g), gaussian(4, 2, g)}), ShapeError);
  CHECK_THROWS_AS(align::global_alignment({}, {}), InvalidArgumentError);
  CHECK_THROWS_AS(align::global_alignment({Dictionary(gaussian(3, 2, g), 0)}, {Matrix::Zero(3, 1)}), ShapeError);
}

}  // TEST_SUITE

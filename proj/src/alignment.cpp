#include "pfeddl/alignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace pfeddl::align {

SignedPermutation::SignedPermutation(std::vector<Index> sources, std::vector<int> signs)
    : sources_(std::move(sources)), signs_(std::move(signs)) {
  const std::size_t k = sources_.size();
  if (signs_.size() != k) throw ShapeError("signed permutation: sources and signs differ in length");
  std::vector<char> seen(k, 0);
  for (std::size_t r = 0; r < k; ++r) {
    const Index s = sources_[r];
    if (s < 0 || static_cast<std::size_t>(s) >= k || seen[static_cast<std::size_t>(s)]) {
      throw InvalidArgumentError("signed permutation: sources are not a bijection on 0..k-1");
    }
    seen[static_cast<std::size_t>(s)] = 1;
    if (signs_[r] != 1 && signs_[r] != -1) {
      throw InvalidArgumentError("signed permutation: signs must be +1 or -1");
    }
  }
}

SignedPermutation SignedPermutation::identity(Index k) {
  std::vector<Index> sources(static_cast<std::size_t>(k));
  std::iota(sources.begin(), sources.end(), Index{0});
  return SignedPermutation(std::move(sources), std::vector<int>(static_cast<std::size_t>(k), 1));
}

SignedPermutation SignedPermutation::random(Index k, Rng& rng) {
  std::vector<Index> sources(static_cast<std::size_t>(k));
  std::iota(sources.begin(), sources.end(), Index{0});
  for (Index i = k - 1; i > 0; --i) {
    const Index j = std::uniform_int_distribution<Index>(0, i)(rng);
    std::swap(sources[static_cast<std::size_t>(i)], sources[static_cast<std::size_t>(j)]);
  }
  std::vector<int> signs(static_cast<std::size_t>(k));
  std::bernoulli_distribution coin(0.5);
  for (auto& s : signs) s = coin(rng) ? -1 : 1;
  return SignedPermutation(std::move(sources), std::move(signs));
}

Matrix SignedPermutation::matrix() const {
  const Index k = size();
  Matrix p = Matrix::Zero(k, k);
  for (Index r = 0; r < k; ++r) p(source(r), r) = sign(r);
  return p;
}

SignedPermutation SignedPermutation::inverse() const {
  std::vector<Index> sources(sources_.size());
  std::vector<int> signs(signs_.size());
  for (std::size_t r = 0; r < sources_.size(); ++r) {
    const auto s = static_cast<std::size_t>(sources_[r]);
    sources[s] = static_cast<Index>(r);
    signs[s] = signs_[r];
  }
  return SignedPermutation(std::move(sources), std::move(signs));
}

SignedPermutation SignedPermutation::then(const SignedPermutation& next) const {
  if (next.size() != size()) throw ShapeError("signed permutation: size mismatch in composition");
  // (P Q) column r = Q(., r) picks P column next.source(r) scaled by next.sign(r).
  std::vector<Index> sources(sources_.size());
  std::vector<int> signs(signs_.size());
  for (Index r = 0; r < size(); ++r) {
    const Index mid = next.source(r);
    sources[static_cast<std::size_t>(r)] = source(mid);
    signs[static_cast<std::size_t>(r)] = sign(mid) * next.sign(r);
  }
  return SignedPermutation(std::move(sources), std::move(signs));
}

Matrix SignedPermutation::permute_columns(const Matrix& dict) const {
  if (dict.cols() != size()) {
    throw ShapeError("signed permutation of size " + std::to_string(size()) +
                     " applied to dictionary " + detail::shape_str(dict));
  }
  Matrix out(dict.rows(), dict.cols());
  for (Index r = 0; r < size(); ++r) out.col(r) = sign(r) * dict.col(source(r));
  return out;
}

Matrix SignedPermutation::permute_rows(const Matrix& codes) const {
  if (codes.rows() != size()) {
    throw ShapeError("signed permutation of size " + std::to_string(size()) +
                     " applied to codes " + detail::shape_str(codes));
  }
  Matrix out(codes.rows(), codes.cols());
  for (Index r = 0; r < size(); ++r) out.row(r) = sign(r) * codes.row(source(r));
  return out;
}

std::pair<Dictionary, SparseCode> apply_signed_permutation(const Dictionary& dict,
                                                           const SparseCode& codes,
                                                           const SignedPermutation& perm) {
  return {Dictionary(perm.permute_columns(dict.atoms), dict.global_count),
          perm.permute_rows(codes)};
}

EdgeWeight atom_edge_weight(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("atom_edge_weight: atoms of dimension " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  if (a.size() == 0) return {0.0, 1};
  const double d = static_cast<double>(a.size());
  const double same = (a - b).squaredNorm() / d;
  const double flipped = (a + b).squaredNorm() / d;
  if (flipped < same) return {flipped, -1};
  return {same, 1};
}

AlignmentGraph::AlignmentGraph(const std::vector<Matrix>& dictionaries) {
  if (dictionaries.empty()) throw InvalidArgumentError("alignment graph needs at least one site");
  const Index d = dictionaries.front().rows();
  atom_count_ = dictionaries.front().cols();
  for (std::size_t i = 0; i < dictionaries.size(); ++i) {
    if (dictionaries[i].rows() != d || dictionaries[i].cols() != atom_count_) {
      throw ShapeError("alignment: site " + std::to_string(i) + " dictionary is " +
                       detail::shape_str(dictionaries[i]) + ", site 0 is " +
                       detail::shape_str(dictionaries.front()));
    }
  }
  const Index k = atom_count_;
  alive_.assign(dictionaries.size(), std::vector<char>(static_cast<std::size_t>(k), 1));
  for (std::size_t i = 0; i + 1 < dictionaries.size(); ++i) {
    std::vector<EdgeWeight> table(static_cast<std::size_t>(k * k));
    for (Index j = 0; j < k; ++j) {
      for (Index l = 0; l < k; ++l) {
        table[static_cast<std::size_t>(j * k + l)] =
            atom_edge_weight(dictionaries[i].col(j), dictionaries[i + 1].col(l));
      }
    }
    tables_.push_back(std::move(table));
  }
}

bool AlignmentGraph::alive(Index site, Index atom) const {
  return alive_.at(static_cast<std::size_t>(site)).at(static_cast<std::size_t>(atom)) != 0;
}

void AlignmentGraph::remove(Index site, Index atom) {
  auto& flag = alive_.at(static_cast<std::size_t>(site)).at(static_cast<std::size_t>(atom));
  if (!flag) throw InvalidStateError("alignment: atom removed twice");
  flag = 0;
}

std::vector<Index> AlignmentGraph::surviving(Index site) const {
  std::vector<Index> out;
  const auto& layer = alive_.at(static_cast<std::size_t>(site));
  for (std::size_t j = 0; j < layer.size(); ++j) {
    if (layer[j]) out.push_back(static_cast<Index>(j));
  }
  return out;
}

Index AlignmentGraph::surviving_count(Index site) const {
  const auto& layer = alive_.at(static_cast<std::size_t>(site));
  return static_cast<Index>(std::count(layer.begin(), layer.end(), char{1}));
}

const EdgeWeight& AlignmentGraph::edge(Index site, Index from, Index to) const {
  return tables_.at(static_cast<std::size_t>(site))[static_cast<std::size_t>(from * atom_count_ + to)];
}

AlignmentPath shortest_alignment_path(const AlignmentGraph& graph) {
  const Index sites = graph.site_count();
  const Index k = graph.atom_count();
  for (Index i = 0; i < sites; ++i) {
    if (graph.surviving_count(i) == 0) {
      throw InvalidStateError("alignment: site " + std::to_string(i) + " has no surviving atoms");
    }
  }

  // Node (site, atom) has id site * k + atom; the sink has id sites * k.
  // Each node keeps the atom sequence of its current best path so equal
  // distances resolve to the lexicographically smallest prefix. Popping by
  // (distance, site, atom) settles every equal-distance predecessor first.
  const Index sink = sites * k;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(sink + 1), inf);
  std::vector<std::vector<Index>> prefix(static_cast<std::size_t>(sink + 1));
  std::vector<char> settled(static_cast<std::size_t>(sink + 1), 0);

  using Entry = std::tuple<double, Index, Index>;  // distance, site, atom
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

  // Offers the path `via` + [atom] to the node for (site, atom).
  auto relax = [&](Index node, double candidate, const std::vector<Index>& via, Index site,
                   Index atom) {
    auto& best = dist[static_cast<std::size_t>(node)];
    auto& path = prefix[static_cast<std::size_t>(node)];
    bool better = candidate < best;
    if (!better && candidate == best) {
      better = std::lexicographical_compare(via.begin(), via.end(), path.begin(),
                                            path.begin() + static_cast<std::ptrdiff_t>(via.size()));
    }
    if (!better) return;
    best = candidate;
    path = via;
    if (node != sink) path.push_back(atom);
    queue.emplace(candidate, site, atom);
  };

  const std::vector<Index> empty;
  for (Index a : graph.surviving(0)) relax(a, 0.0, empty, 0, a);

  while (!queue.empty()) {
    const auto [d, site, atom] = queue.top();
    queue.pop();
    const Index node = site == sites ? sink : site * k + atom;
    if (settled[static_cast<std::size_t>(node)] || d > dist[static_cast<std::size_t>(node)]) continue;
    settled[static_cast<std::size_t>(node)] = 1;
    if (node == sink) break;
    const std::vector<Index> here = prefix[static_cast<std::size_t>(node)];
    if (site + 1 == sites) {
      relax(sink, d, here, sites, 0);
      continue;
    }
    for (Index next : graph.surviving(site + 1)) {
      relax((site + 1) * k + next, d + graph.edge(site, atom, next).weight, here, site + 1, next);
    }
  }

  const auto& atoms = prefix[static_cast<std::size_t>(sink)];
  AlignmentPath path;
  path.weight = dist[static_cast<std::size_t>(sink)];
  int sign = 1;
  for (Index i = 0; i < sites; ++i) {
    if (i > 0) sign *= graph.edge(i - 1, atoms[static_cast<std::size_t>(i - 1)], atoms[static_cast<std::size_t>(i)]).sign;
    path.steps.push_back({atoms[static_cast<std::size_t>(i)], sign});
  }
  return path;
}

double AlignmentRecord::total_weight() const {
  double total = 0.0;
  for (const auto& r : rounds) total += r.weight;
  return total;
}

AlignmentResult global_alignment(const std::vector<Dictionary>& dictionaries,
                                 const std::vector<SparseCode>& codes) {
  if (dictionaries.empty()) throw InvalidArgumentError("global_alignment: no sites");
  if (codes.size() != dictionaries.size()) {
    throw ShapeError("global_alignment: " + std::to_string(dictionaries.size()) +
                     " dictionaries but " + std::to_string(codes.size()) + " code matrices");
  }
  std::vector<Matrix> atoms;
  atoms.reserve(dictionaries.size());
  for (std::size_t i = 0; i < dictionaries.size(); ++i) {
    if (codes[i].rows() != dictionaries[i].atom_count()) {
      throw ShapeError("global_alignment: site " + std::to_string(i) + " codes " +
                       detail::shape_str(codes[i]) + " do not pair with dictionary " +
                       detail::shape_str(dictionaries[i].atoms));
    }
    atoms.push_back(dictionaries[i].atoms);
  }

  AlignmentGraph graph(atoms);
  const Index sites = graph.site_count();
  const Index k = graph.atom_count();
  std::vector<std::vector<Index>> sources(static_cast<std::size_t>(sites));
  std::vector<std::vector<int>> signs(static_cast<std::size_t>(sites));

  AlignmentResult result;
  for (Index round = 0; round < k; ++round) {
    AlignmentPath path = shortest_alignment_path(graph);
    for (Index i = 0; i < sites; ++i) {
      const PathStep& step = path.steps[static_cast<std::size_t>(i)];
      sources[static_cast<std::size_t>(i)].push_back(step.atom);
      signs[static_cast<std::size_t>(i)].push_back(step.sign);
      graph.remove(i, step.atom);
    }
    result.record.rounds.push_back(std::move(path));
  }

  for (Index i = 0; i < sites; ++i) {
    SignedPermutation perm(std::move(sources[static_cast<std::size_t>(i)]),
                           std::move(signs[static_cast<std::size_t>(i)]));
    auto [dict, code] = apply_signed_permutation(dictionaries[static_cast<std::size_t>(i)],
                                                 codes[static_cast<std::size_t>(i)], perm);
    result.dictionaries.push_back(std::move(dict));
    result.codes.push_back(std::move(code));
    result.permutations.push_back(std::move(perm));
  }
  return result;
}

}  // namespace pfeddl::align

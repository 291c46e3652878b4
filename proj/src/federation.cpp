#include "pfeddl/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "pfeddl/dl_core.hpp"

namespace pfeddl::fed {
namespace {

constexpr std::uint64_t kPretrainStream = 1000;
constexpr std::uint64_t kClientStream = 2000;

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// handled by exactly one worker, so per-index outputs need no locking.
template <typename Body>
void for_each_index(std::size_t count, unsigned threads, Body body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<double> aggregation_weights(const std::vector<Index>& sizes) {
  if (sizes.empty()) throw InvalidArgumentError("aggregation_weights: no sites");
  Index total = 0;
  for (Index n : sizes) {
    if (n <= 0) throw InvalidArgumentError("aggregation_weights: sample counts must be positive");
    total += n;
  }
  std::vector<double> weights;
  weights.reserve(sizes.size());
  for (Index n : sizes) weights.push_back(static_cast<double>(n) / static_cast<double>(total));
  return weights;
}

Matrix aggregate_global(const std::vector<Matrix>& parts, const std::vector<Index>& sizes) {
  if (parts.empty()) throw InvalidArgumentError("aggregate_global: no uploaded components");
  if (parts.size() != sizes.size()) {
    throw ShapeError("aggregate_global: " + std::to_string(parts.size()) + " components but " +
                     std::to_string(sizes.size()) + " sample counts");
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].rows() != parts[0].rows() || parts[i].cols() != parts[0].cols()) {
      throw ShapeError("aggregate_global: component " + std::to_string(i) + " is " +
                       detail::shape_str(parts[i]) + ", component 0 is " +
                       detail::shape_str(parts[0]));
    }
    if (sizes[i] <= 0) throw InvalidArgumentError("aggregate_global: sample counts must be positive");
  }
  // avg_j = avg_{j-1} + (n_j / N_j) (part_j - avg_{j-1}), N_j the running total.
  Matrix avg = parts[0];
  Index running = sizes[0];
  for (std::size_t i = 1; i < parts.size(); ++i) {
    running += sizes[i];
    const double step = static_cast<double>(sizes[i]) / static_cast<double>(running);
    avg += step * (parts[i] - avg);
  }
  return avg;
}

AggregationServer::AggregationServer(Index dim, Index global_count, bool record)
    : dim_(dim), global_count_(global_count), record_(record), d_avg_(Matrix::Zero(dim, global_count)) {}

void AggregationServer::receive(Upload upload) {
  if (upload.global_block.rows() != dim_ || upload.global_block.cols() != global_count_) {
    throw ShapeError("server: upload is " + detail::shape_str(upload.global_block) + ", expected " +
                     std::to_string(dim_) + "x" + std::to_string(global_count_));
  }
  if (record_) records_.push_back({round_ + 1, upload});
  pending_.push_back(std::move(upload));
}

const Matrix& AggregationServer::aggregate() {
  if (pending_.empty()) throw InvalidStateError("server: aggregate called with no uploads");
  std::vector<Matrix> parts;
  std::vector<Index> sizes;
  parts.reserve(pending_.size());
  for (auto& u : pending_) {
    parts.push_back(std::move(u.global_block));
    sizes.push_back(u.sample_count);
  }
  pending_.clear();
  d_avg_ = aggregate_global(parts, sizes);
  ++round_;
  return d_avg_;
}

ClientState client_local_round(ClientState state, const Hyperparams& hyper,
                               std::vector<std::string>* warnings) {
  for (int it = 0; it < hyper.iters_local; ++it) {
    state.w = dl::update_classifier(state.w, state.Y, state.S, hyper.eta, hyper.lambda3);
    state.S = dl::update_codes_supervised(state.S, state.D, state.X, state.Y, state.w, hyper);
    state.D = dl::update_dictionary(state.D, state.S, state.X, hyper.eta, hyper.lambda4,
                                    hyper.lambda1);
    state.D = dl::normalize_columns(state.D, state.rng, warnings);
  }
  return state;
}

Upload make_upload(const ClientState& state) {
  return {Matrix(state.D.global_block()), state.sample_count()};
}

ClientState broadcast_merge(ClientState state, const Matrix& d_avg) {
  if (d_avg.cols() != state.D.global_count || d_avg.rows() != state.D.dim()) {
    throw ShapeError("broadcast_merge: global block is " + detail::shape_str(d_avg) +
                     ", client expects " + std::to_string(state.D.dim()) + "x" +
                     std::to_string(state.D.global_count));
  }
  state.D.atoms.leftCols(state.D.global_count) = d_avg;
  return state;
}

ClientState make_client(int site_id, const SiteInput& site, Dictionary dict, SparseCode codes,
                        std::uint64_t seed) {
  ClientState state;
  state.site_id = site_id;
  state.X = site.X;
  state.Y = site.Y;
  state.w = ClassifierWeights::zeros(dict.atom_count());
  state.D = std::move(dict);
  state.S = std::move(codes);
  state.rng = make_rng(seed, kClientStream + static_cast<std::uint64_t>(site_id));
  return state;
}

std::vector<dl::PretrainResult> pretrain_sites(const std::vector<SiteInput>& sites,
                                               const Hyperparams& hyper, unsigned threads) {
  std::vector<dl::PretrainResult> out(sites.size());
  for_each_index(sites.size(), threads, [&](std::size_t i) {
    Rng rng = make_rng(hyper.seed, kPretrainStream + i);
    out[i] = dl::pretrain_local(sites[i].X, hyper, rng);
  });
  return out;
}

FederationRun run_pfeddl(const std::vector<SiteInput>& sites, const Hyperparams& hyper,
                         const RunOptions& options) {
  hyper.validate();
  if (sites.empty()) throw ConfigError("run_pfeddl: at least one client is required");
  const Index d = sites.front().X.rows();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].X.rows() != d) {
      throw ConfigError("run_pfeddl: site " + std::to_string(i) + " has feature dimension " +
                        std::to_string(sites[i].X.rows()) + " but site 0 has " + std::to_string(d));
    }
    if (sites[i].X.cols() < 1) throw ConfigError("run_pfeddl: site " + std::to_string(i) + " has no samples");
    if (sites[i].Y.size() != sites[i].X.cols()) {
      throw ShapeError("run_pfeddl: site " + std::to_string(i) + " has " +
                       std::to_string(sites[i].X.cols()) + " samples but " +
                       std::to_string(sites[i].Y.size()) + " labels");
    }
  }

  const std::size_t count = sites.size();
  FederationRun run;

  std::vector<dl::PretrainResult> pretrained = pretrain_sites(sites, hyper, options.threads);

  std::vector<Dictionary> dicts;
  std::vector<SparseCode> codes;
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& w : pretrained[i].warnings) run.warnings.push_back("site " + std::to_string(i) + " pretrain: " + w);
    dicts.push_back(std::move(pretrained[i].dictionary));
    codes.push_back(std::move(pretrained[i].codes));
  }
  run.alignment = align::global_alignment(dicts, codes);

  for (std::size_t i = 0; i < count; ++i) {
    Dictionary dict(run.alignment.dictionaries[i].atoms, hyper.g);
    run.clients.push_back(make_client(static_cast<int>(i), sites[i], std::move(dict),
                                      run.alignment.codes[i], hyper.seed));
  }

  AggregationServer server(d, hyper.g, options.record_server);
  std::optional<Matrix> previous_avg;
  std::vector<std::vector<std::string>> client_warnings(count);

  for (int round = 1; round <= hyper.iters_fed; ++round) {
    const auto start = std::chrono::steady_clock::now();
    RoundReport report;
    report.round = round;
    report.objective_pre.resize(count);
    report.objective_post.resize(count);

    for_each_index(count, options.threads, [&](std::size_t i) {
      ClientState& c = run.clients[i];
      report.objective_pre[i] = dl::objective_site(c.X, c.Y, c.D, c.S, c.w, hyper);
      c = client_local_round(std::move(c), hyper, &client_warnings[i]);
    });

    for (const auto& c : run.clients) server.receive(make_upload(c));
    const Matrix& d_avg = server.aggregate();

    for (std::size_t i = 0; i < count; ++i) {
      ClientState& c = run.clients[i];
      c = broadcast_merge(std::move(c), d_avg);
      report.objective_post[i] = dl::objective_site(c.X, c.Y, c.D, c.S, c.w, hyper);
    }
    if (previous_avg) report.drift = (d_avg - *previous_avg).norm();
    previous_avg = d_avg;

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.on_round) options.on_round(report);
    run.rounds.push_back(std::move(report));
  }

  for (std::size_t i = 0; i < count; ++i) {
    for (auto& w : client_warnings[i]) run.warnings.push_back("site " + std::to_string(i) + ": " + w);
  }
  run.server_records = server.records();
  return run;
}

}  // namespace pfeddl::fed

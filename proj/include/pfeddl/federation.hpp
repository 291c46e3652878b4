#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pfeddl/alignment.hpp"
#include "pfeddl/dl_core.hpp"
#include "pfeddl/types.hpp"

namespace pfeddl::fed {

/// Everything one site owns. Only the global dictionary block and the sample
/// count ever leave the client, through Upload.
struct ClientState {
  int site_id = 0;
  DataMatrix X;
  Labels Y;
  Dictionary D;
  SparseCode S;
  ClassifierWeights w;
  Rng rng;

  Index sample_count() const noexcept { return X.cols(); }
};

/// The complete payload a client sends to the server each round.
struct Upload {
  Matrix global_block;  // d x g
  Index sample_count = 0;
};

/// Upload as observed by the server, tagged with the round it arrived in.
struct ServerRecord {
  int round = 0;
  Upload upload;
};

/// Sample-count weights n_i / sum_j n_j.
std::vector<double> aggregation_weights(const std::vector<Index>& sizes);

/// Sample-count-weighted mean of equally shaped blocks. Accumulated as a
/// running mean, so identical inputs are returned exactly.
Matrix aggregate_global(const std::vector<Matrix>& parts, const std::vector<Index>& sizes);

/// In-process aggregation server. Its only input channel is receive(); with
/// recording enabled every upload is kept for inspection.
class AggregationServer {
 public:
  AggregationServer(Index dim, Index global_count, bool record = false);

  void receive(Upload upload);

  /// Averages the uploads of the current round, clears them and advances the
  /// round counter.
  const Matrix& aggregate();

  const Matrix& current() const noexcept { return d_avg_; }
  int round() const noexcept { return round_; }
  const std::vector<ServerRecord>& records() const noexcept { return records_; }

 private:
  Index dim_;
  Index global_count_;
  bool record_;
  int round_ = 0;
  Matrix d_avg_;
  std::vector<Upload> pending_;
  std::vector<ServerRecord> records_;
};

/// hyper.iters_local iterations of: classifier step, supervised code step,
/// dictionary step, column normalization.
ClientState client_local_round(ClientState state, const Hyperparams& hyper,
                               std::vector<std::string>* warnings = nullptr);

Upload make_upload(const ClientState& state);

/// Replaces columns [0, g) of the client dictionary with `d_avg`.
ClientState broadcast_merge(ClientState state, const Matrix& d_avg);

struct RoundReport {
  int round = 0;
  std::vector<double> objective_pre;   // per site, before the local round
  std::vector<double> objective_post;  // per site, after broadcast_merge
  std::optional<double> drift;         // ||D_avg(t) - D_avg(t-1)||_F, none for the first round
  double seconds = 0.0;
};

struct RunOptions {
  unsigned threads = 1;
  bool record_server = false;
  std::function<void(const RoundReport&)> on_round;  // called after each round
};

struct FederationRun {
  std::vector<ClientState> clients;
  align::AlignmentResult alignment;  // pretrained dictionaries after alignment
  std::vector<RoundReport> rounds;
  std::vector<ServerRecord> server_records;  // empty unless options.record_server
  std::vector<std::string> warnings;
};

/// Pretrains every site, aligns the pretrained dictionaries once, then runs
/// hyper.iters_fed rounds of local training, aggregation and broadcast.
FederationRun run_pfeddl(const std::vector<SiteInput>& sites, const Hyperparams& hyper,
                         const RunOptions& options = {});

/// Unsupervised pretraining of every site, each with its own generator stream
/// derived from hyper.seed. Sites run on up to `threads` workers.
std::vector<dl::PretrainResult> pretrain_sites(const std::vector<SiteInput>& sites,
                                               const Hyperparams& hyper, unsigned threads = 1);

/// Starting client state from aligned pretrained factors with a zero classifier.
ClientState make_client(int site_id, const SiteInput& site, Dictionary dict, SparseCode codes,
                        std::uint64_t seed);

}  // namespace pfeddl::fed

#pragma once

#include <iosfwd>
#include <string>

#include "pfeddl/config.hpp"

namespace pfeddl::cli {

/// Sets the log level of the "pfeddl" logger. PFEDDL_LOG, when set, wins over
/// `fallback`. Accepts trace, debug, info, warn, error, critical, off.
void configure_logging(const std::string& fallback);

/// Writes site_<i>/{X,Y}.txt, truth/ and manifest.json under config.out. The
/// tree is built in a sibling temporary directory and moved into place.
int cmd_synth(const RunConfig& config, std::ostream& out);

/// Cross-validated training. Writes the report files, rounds.jsonl (streamed,
/// with wall-clock) and config.json, then prints the accuracy table.
int cmd_train(const RunConfig& config, std::ostream& out);

struct AlignOptions {
  bool planted_demo = false;
};

/// Pretrains every site, aligns, and writes alignment.json and
/// aligned/<site>/{D,S}.txt. The planted demo skips the data and aligns
/// randomly signed-permuted copies of one random dictionary instead.
int cmd_align(const RunConfig& config, const AlignOptions& options, std::ostream& out);

/// One training run per sweep value under out/<param>_<value>/, plus
/// out/sweep.csv with a row per value, flushed as each run finishes.
int cmd_sweep(const RunConfig& config, std::ostream& out);

}  // namespace pfeddl::cli

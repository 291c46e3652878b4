#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfeddl/alignment.hpp"
#include "pfeddl/evaluation.hpp"
#include "pfeddl/federation.hpp"

namespace pfeddl::report {

using Json = nlohmann::ordered_json;

Json to_json(const Hyperparams& hyper);
Json to_json(const align::AlignmentRecord& record,
             const std::vector<align::SignedPermutation>& permutations);

/// One rounds.jsonl line. Wall-clock is included only when asked for, so the
/// deterministic report files never carry it.
Json round_to_json(const fed::RoundReport& round, int fold, bool with_seconds);

/// Everything in the report except wall-clock timings and model matrices.
Json to_json(const eval::FederationReport& report);

/// Per-site mean±std accuracy table, one row for the model, sites as columns.
std::string accuracy_table(const eval::FederationReport& report, const std::string& model = "PFedDL");

/// round,site,objective_pre,objective_post,drift for the run on all data.
std::string objective_csv(const eval::FederationReport& report);

/// fold,site,accuracy
std::string folds_csv(const eval::FederationReport& report);

/// `roi_index score` lines, ROIs in index order.
std::string roi_lines(const eval::RoiImportance& roi);

/// Writes report.json, accuracy.txt, folds.csv, objective.csv, alignment.json,
/// roi_<site>.txt (when available) and models/<site>/{D,S,w,b}.txt under `dir`.
void write_report_files(const std::filesystem::path& dir, const eval::FederationReport& report);

/// Writes `text` to `path` via a temporary file in the same directory.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pfeddl::report

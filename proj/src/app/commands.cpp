#include "pfeddl/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "pfeddl/alignment.hpp"
#include "pfeddl/federation.hpp"
#include "pfeddl/report.hpp"

namespace pfeddl::cli {
namespace fs = std::filesystem;
using report::Json;

namespace {

struct LoadedData {
  std::vector<SiteInput> sites;
  std::vector<std::string> names;
  std::optional<io::GroundTruth> truth;
};

LoadedData load_data(const RunConfig& config) {
  LoadedData data;
  if (config.synthetic && !config.site_dirs.empty()) {
    throw ConfigError("give exactly one data source, not both a synthetic spec and site directories");
  }
  if (config.synthetic) {
    io::SyntheticFederation fed = io::generate_synthetic_federation(*config.synthetic);
    data.sites = std::move(fed.sites);
    for (std::size_t i = 0; i < data.sites.size(); ++i) data.names.push_back("site_" + std::to_string(i));
    data.truth = std::move(fed.truth);
    return data;
  }
  if (config.site_dirs.empty()) {
    throw ConfigError("no data source: use --data DIR, --quickstart, or a config with a data section");
  }
  for (const auto& dir : config.site_dirs) {
    spdlog::debug("loading site directory {}", dir.string());
    data.sites.push_back(io::load_site_directory(dir));
    fs::path p = dir.lexically_normal();
    if (p.filename().empty()) p = p.parent_path();
    std::string name = p.filename().string();
    if (name.empty() || std::find(data.names.begin(), data.names.end(), name) != data.names.end()) {
      name = "site_" + std::to_string(data.names.size());
    }
    data.names.push_back(name);
  }
  if (config.truth_dir) data.truth = io::load_ground_truth(*config.truth_dir);
  return data;
}

void check_dimensions(const LoadedData& data) {
  for (std::size_t i = 1; i < data.sites.size(); ++i) {
    if (data.sites[i].X.rows() != data.sites[0].X.rows()) {
      throw ConfigError("site " + data.names[i] + " has feature dimension " +
                        std::to_string(data.sites[i].X.rows()) + " but site " + data.names[0] + " has " +
                        std::to_string(data.sites[0].X.rows()));
    }
  }
}

fs::path normalized_target(const fs::path& out) {
  fs::path target = out.lexically_normal();
  if (target.filename().empty()) target = target.parent_path();
  if (target.empty()) throw ConfigError("output directory is empty");
  return target;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

std::string join(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

std::string join_signs(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::string(i ? " " : "") + (v[i] > 0 ? "+" : "-");
  return s;
}

void print_alignment(const align::AlignmentResult& result, const std::vector<std::string>& names,
                     std::ostream& out) {
  out << "round  weight\n";
  for (std::size_t r = 0; r < result.record.rounds.size(); ++r) {
    out << r << "  " << io::format_double(result.record.rounds[r].weight) << '\n';
  }
  out << "total path weight " << io::format_double(result.record.total_weight()) << '\n';
  for (std::size_t i = 0; i < result.permutations.size(); ++i) {
    out << names[i] << " sources " << join(result.permutations[i].sources()) << '\n';
    out << names[i] << " signs   " << join_signs(result.permutations[i].signs()) << '\n';
  }
}

int train_impl(const RunConfig& config, std::ostream& out, eval::FederationReport* summary) {
  LoadedData data = load_data(config);

  eval::ExperimentConfig exp;
  exp.sites = std::move(data.sites);
  exp.site_names = std::move(data.names);
  exp.truth = std::move(data.truth);
  exp.hyper = config.hyper;
  exp.folds = config.folds;
  exp.run_options.threads = config.threads;
  exp.roi_sign = config.roi_sign;
  exp.top_atoms = config.top_atoms;
  exp.top_rois = config.top_rois;

  const fs::path dir = normalized_target(config.out);
  make_dirs(dir);
  Json resolved = config_to_json(config);
  resolved.erase("out");
  report::write_text_file(dir / "config.json", resolved.dump(2) + "\n");

  // Streamed so a failed run still leaves its progress behind.
  std::ofstream rounds(dir / "rounds.jsonl", std::ios::trunc);
  if (!rounds) throw IoError("cannot open '" + (dir / "rounds.jsonl").string() + "' for writing");
  exp.on_round = [&](int fold, const fed::RoundReport& r) {
    rounds << report::round_to_json(r, fold, true).dump() << '\n' << std::flush;
    if (r.round == 1 || r.round == config.hyper.iters_fed) {
      spdlog::debug("{} round {}/{}", fold < 0 ? std::string("full run") : "fold " + std::to_string(fold),
                    r.round, config.hyper.iters_fed);
    }
  };

  spdlog::info("training on {} sites, {} folds, k={} g={}", exp.sites.size(), exp.folds, exp.hyper.k,
               exp.hyper.g);
  eval::FederationReport rep = eval::run_experiment(exp);
  report::write_report_files(dir, rep);
  for (const auto& w : rep.warnings) spdlog::warn("{}", w);

  out << report::accuracy_table(rep);
  if (rep.global_atom_recovery) {
    out << "global atom recovery " << io::format_double(*rep.global_atom_recovery) << '\n';
  }
  out << "report written to " << dir.string() << '\n';
  const bool ok = rep.success;
  if (summary) *summary = std::move(rep);
  if (!ok) spdlog::error("report declares failure (non-finite accuracy or objective)");
  return ok ? 0 : 1;
}

}  // namespace

void configure_logging(const std::string& fallback) {
  auto logger = spdlog::get("pfeddl");
  if (!logger) {
    logger = spdlog::stderr_logger_mt("pfeddl");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  std::string wanted = fallback;
  if (const char* env = std::getenv("PFEDDL_LOG"); env && *env) wanted = env;
  auto level = spdlog::level::from_str(wanted);
  // from_str maps unknown names to off; only accept that for "off" itself.
  if (level == spdlog::level::off && wanted != "off") {
    level = spdlog::level::info;
    logger->set_level(level);
    spdlog::warn("unknown log level '{}', using info", wanted);
    return;
  }
  logger->set_level(level);
}

int cmd_synth(const RunConfig& config, std::ostream& out) {
  try {
    if (!config.synthetic) {
      throw ConfigError("synth needs a synthetic spec: use --quickstart or a config with data.synthetic");
    }
    const io::SyntheticSpec& spec = *config.synthetic;
    const io::SyntheticFederation fed = io::generate_synthetic_federation(spec);

    const fs::path target = normalized_target(config.out);
    if (fs::exists(target) && !(fs::is_directory(target) && (fs::is_empty(target) ||
                                                            fs::exists(target / "manifest.json")))) {
      throw IoError("'" + target.string() + "' exists and is not an earlier synth output");
    }
    fs::path parent = target.parent_path();
    if (parent.empty()) parent = ".";
    const fs::path tmp = parent / ("." + target.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    make_dirs(tmp);

    Json manifest;
    try {
      Json sites = Json::array();
      for (std::size_t i = 0; i < fed.sites.size(); ++i) {
        const std::string name = "site_" + std::to_string(i);
        make_dirs(tmp / name);
        io::save_matrix(tmp / name / "X.txt", fed.sites[i].X);
        io::save_labels(tmp / name / "Y.txt", fed.sites[i].Y);
        Index positives = 0;
        for (Index a = 0; a < fed.sites[i].Y.size(); ++a) positives += fed.sites[i].Y[a];
        sites.push_back(Json{{"name", name},
                             {"X", name + "/X.txt"},
                             {"Y", name + "/Y.txt"},
                             {"samples", fed.sites[i].Y.size()},
                             {"positives", positives}});
      }
      io::save_ground_truth(tmp / "truth", fed.truth);
      RunConfig echo;
      echo.synthetic = spec;
      manifest["spec"] = config_to_json(echo)["data"]["synthetic"];
      manifest["sites"] = sites;
      manifest["truth"] = "truth";
      report::write_text_file(tmp / "manifest.json", manifest.dump(2) + "\n");
    } catch (...) {
      fs::remove_all(tmp, ec);
      throw;
    }

    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(tmp, target, ec);
    if (ec) {
      fs::remove_all(tmp, ec);
      throw IoError("cannot move synthetic data into '" + target.string() + "'");
    }

    out << "wrote " << target.string() << '\n';
    for (const auto& s : manifest["sites"]) {
      out << "  " << s["X"].get<std::string>() << "  " << s["Y"].get<std::string>() << "  ("
          << s["samples"].get<Index>() << " samples, " << s["positives"].get<Index>() << " positive)\n";
    }
    out << "  truth/\n  manifest.json\n";
    return 0;
  } catch (const std::exception& e) {
    spdlog::error("synth: {}", e.what());
    return 1;
  }
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  try {
    return train_impl(config, out, nullptr);
  } catch (const std::exception& e) {
    spdlog::error("train: {}", e.what());
    return 1;
  }
}

int cmd_align(const RunConfig& config, const AlignOptions& options, std::ostream& out) {
  try {
    config.hyper.validate();
    const fs::path dir = normalized_target(config.out);
    std::vector<Dictionary> dicts;
    std::vector<SparseCode> codes;
    std::vector<std::string> names;
    std::vector<align::SignedPermutation> planted;

    if (options.planted_demo) {
      const Index d = config.synthetic ? config.synthetic->d : 32;
      const Index sites = config.synthetic ? config.synthetic->sites : 4;
      const Index k = config.hyper.k;
      Rng rng = make_rng(config.hyper.seed, 0xa11);
      std::normal_distribution<double> normal(0.0, 1.0);
      Matrix ref(d, k);
      for (Index j = 0; j < k; ++j) {
        for (Index i = 0; i < d; ++i) ref(i, j) = normal(rng);
        ref.col(j).normalize();
      }
      for (Index i = 0; i < sites; ++i) {
        planted.push_back(align::SignedPermutation::random(k, rng));
        dicts.emplace_back(planted.back().permute_columns(ref), std::min(config.hyper.g, k));
        codes.push_back(SparseCode::Zero(k, 1));
        names.push_back("site_" + std::to_string(i));
      }
    } else {
      LoadedData data = load_data(config);
      check_dimensions(data);
      names = data.names;
      auto pretrained = fed::pretrain_sites(data.sites, config.hyper, config.threads);
      for (auto& p : pretrained) {
        for (const auto& w : p.warnings) spdlog::warn("pretrain: {}", w);
        dicts.emplace_back(std::move(p.dictionary.atoms), config.hyper.g);
        codes.push_back(std::move(p.codes));
      }
    }

    const align::AlignmentResult result = align::global_alignment(dicts, codes);

    make_dirs(dir);
    Json doc = report::to_json(result.record, result.permutations);
    doc["sites"] = names;
    if (options.planted_demo) {
      Json p = Json::array();
      for (const auto& perm : planted) p.push_back(Json{{"sources", perm.sources()}, {"signs", perm.signs()}});
      doc["planted"] = p;
    }
    report::write_text_file(dir / "alignment.json", doc.dump(2) + "\n");
    for (std::size_t i = 0; i < names.size(); ++i) {
      make_dirs(dir / "aligned" / names[i]);
      io::save_matrix(dir / "aligned" / names[i] / "D.txt", result.dictionaries[i].atoms);
      io::save_matrix(dir / "aligned" / names[i] / "S.txt", result.codes[i]);
    }

    if (options.planted_demo) {
      for (std::size_t i = 0; i < planted.size(); ++i) {
        out << names[i] << " planted sources " << join(planted[i].sources()) << '\n';
        out << names[i] << " planted signs   " << join_signs(planted[i].signs()) << '\n';
      }
      double deviation = 0.0;
      for (const auto& d : result.dictionaries) {
        deviation = std::max(deviation, (d.atoms - result.dictionaries[0].atoms).cwiseAbs().maxCoeff());
      }
      out << "max deviation between aligned dictionaries " << io::format_double(deviation) << '\n';
    }
    print_alignment(result, names, out);
    out << "alignment written to " << dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    spdlog::error("align: {}", e.what());
    return 1;
  }
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
  try {
    if (!config.sweep || config.sweep->values.empty()) throw ConfigError("sweep range is empty");
    const std::string& param = config.sweep->param;
    const auto& names = hyperparam_names();
    if (std::find(names.begin(), names.end(), param) == names.end()) {
      throw ConfigError("cannot sweep '" + param + "': not a hyperparameter");
    }

    const fs::path dir = normalized_target(config.out);
    make_dirs(dir);
    std::ofstream csv(dir / "sweep.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + (dir / "sweep.csv").string() + "' for writing");
    csv << "param,value,mean_accuracy,std,status\n" << std::flush;

    int failures = 0;
    for (double value : config.sweep->values) {
      const std::string label = io::format_double(value);
      RunConfig run = config;
      run.sweep.reset();
      run.out = dir / (param + "_" + label);
      eval::FederationReport rep;
      int rc = 1;
      try {
        set_hyperparam(run.hyper, param, value);
        spdlog::info("sweep {}={} (k={} g={})", param, label, run.hyper.k, run.hyper.g);
        rc = train_impl(run, out, &rep);
      } catch (const std::exception& e) {
        spdlog::error("sweep {}={}: {}", param, label, e.what());
      }
      if (rc == 0) {
        csv << param << ',' << label << ',' << io::format_double(rep.average_mean) << ','
            << io::format_double(rep.average_std) << ",ok\n";
      } else {
        ++failures;
        csv << param << ',' << label << ",,,failed\n";
      }
      csv.flush();
    }
    out << "sweep table written to " << (dir / "sweep.csv").string() << '\n';
    if (failures) spdlog::error("{} of {} sweep runs failed", failures, config.sweep->values.size());
    return failures ? 1 : 0;
  } catch (const std::exception& e) {
    spdlog::error("sweep: {}", e.what());
    return 1;
  }
}

}  // namespace pfeddl::cli

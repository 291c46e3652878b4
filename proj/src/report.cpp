#include "pfeddl/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfeddl/dataio.hpp"

namespace pfeddl::report {
namespace fs = std::filesystem;

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

Json index_list(const std::vector<Index>& v) {
  Json out = Json::array();
  for (Index i : v) out.push_back(i);
  return out;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

Json to_json(const Hyperparams& h) {
  return Json{{"lambda1", h.lambda1},
              {"lambda2", h.lambda2},
              {"lambda3", h.lambda3},
              {"lambda4", h.lambda4},
              {"eta", h.eta},
              {"k", h.k},
              {"g", h.g},
              {"iters_local", h.iters_local},
              {"iters_fed", h.iters_fed},
              {"iters_pretrain", h.iters_pretrain},
              {"seed", h.seed}};
}

Json to_json(const align::AlignmentRecord& record,
             const std::vector<align::SignedPermutation>& permutations) {
  Json rounds = Json::array();
  for (std::size_t r = 0; r < record.rounds.size(); ++r) {
    const auto& path = record.rounds[r];
    Json atoms = Json::array();
    Json signs = Json::array();
    for (const auto& step : path.steps) {
      atoms.push_back(step.atom);
      signs.push_back(step.sign);
    }
    rounds.push_back(Json{{"round", r}, {"weight", path.weight}, {"atoms", atoms}, {"signs", signs}});
  }
  Json perms = Json::array();
  for (const auto& p : permutations) {
    perms.push_back(Json{{"sources", index_list(p.sources())}, {"signs", p.signs()}});
  }
  return Json{{"site_order", "input order; edges join consecutive sites"},
              {"total_weight", record.total_weight()},
              {"rounds", rounds},
              {"permutations", perms}};
}

Json round_to_json(const fed::RoundReport& round, int fold, bool with_seconds) {
  Json out;
  if (fold >= 0) {
    out["fold"] = fold;
  } else {
    out["fold"] = "full";
  }
  out["round"] = round.round;
  out["objective_pre"] = round.objective_pre;
  out["objective_post"] = round.objective_post;
  out["drift"] = round.drift ? Json(*round.drift) : Json(nullptr);
  if (with_seconds) out["seconds"] = round.seconds;
  return out;
}

Json to_json(const eval::FederationReport& report) {
  Json out;
  out["success"] = report.success;
  out["hyper"] = to_json(report.hyper);
  out["folds"] = report.folds;

  Json sites = Json::array();
  for (const auto& s : report.sites) sites.push_back(Json{{"name", s.name}, {"mean", s.mean}, {"std", s.std}});
  out["sites"] = sites;
  out["average"] = Json{{"mean", report.average_mean}, {"std", report.average_std}};

  Json folds = Json::array();
  for (const auto& f : report.fold_results) {
    Json rounds = Json::array();
    for (const auto& r : f.rounds) rounds.push_back(round_to_json(r, f.fold, false));
    folds.push_back(Json{{"fold", f.fold},
                         {"site_accuracy", f.site_accuracy},
                         {"mean_accuracy", f.mean_accuracy},
                         {"rounds", rounds}});
  }
  out["fold_results"] = folds;

  Json full = Json::array();
  for (const auto& r : report.full_rounds) full.push_back(round_to_json(r, -1, false));
  out["full_rounds"] = full;
  out["alignment"] = to_json(report.alignment, report.permutations);

  Json roi = Json::array();
  for (std::size_t i = 0; i < report.roi.size(); ++i) {
    if (!report.roi[i]) {
      roi.push_back(nullptr);
      continue;
    }
    roi.push_back(Json{{"site", report.sites.at(i).name},
                       {"top_rois", index_list(report.roi[i]->top_rois)},
                       {"top_atoms", index_list(report.roi[i]->top_atoms)},
                       {"scores", vector_json(report.roi[i]->scores)}});
  }
  out["roi"] = roi;
  out["global_atom_recovery"] =
      report.global_atom_recovery ? Json(*report.global_atom_recovery) : Json(nullptr);
  out["warnings"] = report.warnings;
  return out;
}

std::string accuracy_table(const eval::FederationReport& report, const std::string& model) {
  std::vector<std::string> header{"Site / Model"};
  std::vector<std::string> row{model};
  for (const auto& s : report.sites) {
    header.push_back(s.name);
    row.push_back(fixed3(s.mean) + "±" + fixed3(s.std));
  }
  header.push_back("Average");
  row.push_back(fixed3(report.average_mean));

  // Column widths by code point count; "±" is two bytes in UTF-8.
  auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
    return n;
  };
  std::ostringstream out;
  for (const auto* line : {&header, &row}) {
    for (std::size_t c = 0; c < line->size(); ++c) {
      const std::size_t w = std::max(width(header[c]), width(row[c]));
      const std::string& cell = (*line)[c];
      if (c + 1 < line->size()) {
        out << cell << std::string(w - width(cell), ' ') << "  ";
      } else {
        out << cell << '\n';
      }
    }
  }
  return out.str();
}

std::string objective_csv(const eval::FederationReport& report) {
  std::ostringstream out;
  out << "round,site,objective_pre,objective_post,drift\n";
  for (const auto& r : report.full_rounds) {
    for (std::size_t i = 0; i < r.objective_post.size(); ++i) {
      out << r.round << ',' << report.sites.at(i).name << ',' << io::format_double(r.objective_pre[i])
          << ',' << io::format_double(r.objective_post[i]) << ','
          << (r.drift ? io::format_double(*r.drift) : std::string()) << '\n';
    }
  }
  return out.str();
}

std::string folds_csv(const eval::FederationReport& report) {
  std::ostringstream out;
  out << "fold,site,accuracy\n";
  for (const auto& f : report.fold_results) {
    for (std::size_t i = 0; i < f.site_accuracy.size(); ++i) {
      out << f.fold << ',' << report.sites.at(i).name << ',' << io::format_double(f.site_accuracy[i])
          << '\n';
    }
  }
  return out.str();
}

std::string roi_lines(const eval::RoiImportance& roi) {
  std::ostringstream out;
  for (Index r = 0; r < roi.scores.size(); ++r) out << r << ' ' << io::format_double(roi.scores(r)) << '\n';
  return out.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

void write_report_files(const fs::path& dir, const eval::FederationReport& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  write_text_file(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text_file(dir / "accuracy.txt", accuracy_table(report));
  write_text_file(dir / "folds.csv", folds_csv(report));
  write_text_file(dir / "objective.csv", objective_csv(report));
  write_text_file(dir / "alignment.json", to_json(report.alignment, report.permutations).dump(2) + "\n");

  for (std::size_t i = 0; i < report.final_clients.size(); ++i) {
    const std::string& name = report.sites.at(i).name;
    if (i < report.roi.size() && report.roi[i]) {
      write_text_file(dir / ("roi_" + name + ".txt"), roi_lines(*report.roi[i]));
    }
    const fed::ClientState& c = report.final_clients[i];
    const fs::path model = dir / "models" / name;
    fs::create_directories(model, ec);
    if (ec) throw IoError("cannot create '" + model.string() + "': " + ec.message());
    io::save_matrix(model / "D.txt", c.D.atoms);
    io::save_matrix(model / "S.txt", c.S);
    io::save_matrix(model / "w.txt", c.w.w);
    io::save_matrix(model / "b.txt", Matrix::Constant(1, 1, c.w.b));
  }
}

}  // namespace pfeddl::report

#include "pfeddl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "pfeddl/profiles.hpp"
#include "pfeddl/report.hpp"

namespace pfeddl::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ConfigError("config " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) bad(where, "unknown key '" + key + "'");
  }
}

double get_real(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) bad(where + "." + key, "expected a number");
  return v.get<double>();
}

long long get_int(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
  return v.get<long long>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) bad(where + "." + key, "expected a string");
  return v.get<std::string>();
}

void read_synthetic(const json& obj, io::SyntheticSpec& spec) {
  const std::string where = "data.synthetic";
  check_keys(obj, where,
             {"d", "k_true", "g_true", "sites", "samples_per_site", "sparsity", "noise_std", "margin", "seed"});
  if (obj.contains("d")) spec.d = get_int(obj, "d", where);
  if (obj.contains("k_true")) spec.k_true = get_int(obj, "k_true", where);
  if (obj.contains("g_true")) spec.g_true = get_int(obj, "g_true", where);
  if (obj.contains("sites")) {
    spec.sites = get_int(obj, "sites", where);
    if (!obj.contains("samples_per_site") && spec.sites > 0) {
      const Index n = spec.samples_per_site.empty() ? 150 : spec.samples_per_site.front();
      spec.samples_per_site.assign(static_cast<std::size_t>(spec.sites), n);
    }
  }
  if (obj.contains("samples_per_site")) {
    const json& v = obj.at("samples_per_site");
    if (v.is_number_integer()) {
      spec.samples_per_site.assign(static_cast<std::size_t>(std::max<Index>(spec.sites, 0)), v.get<Index>());
    } else if (v.is_array()) {
      spec.samples_per_site.clear();
      for (const auto& n : v) {
        if (!n.is_number_integer()) bad(where + ".samples_per_site", "expected integers");
        spec.samples_per_site.push_back(n.get<Index>());
      }
    } else {
      bad(where + ".samples_per_site", "expected an integer or a list of integers");
    }
  }
  if (obj.contains("sparsity")) spec.sparsity = get_int(obj, "sparsity", where);
  if (obj.contains("noise_std")) spec.noise_std = get_real(obj, "noise_std", where);
  if (obj.contains("margin")) spec.margin = get_real(obj, "margin", where);
  if (obj.contains("seed")) spec.seed = static_cast<std::uint64_t>(get_int(obj, "seed", where));
  spec.validate();
}

void read_hyper(const json& obj, Hyperparams& h) {
  check_keys(obj, "hyper",
             {"lambda1", "lambda2", "lambda3", "lambda4", "eta", "k", "g", "iters_local", "iters_fed",
              "iters_pretrain", "seed"});
  for (const auto& [key, value] : obj.items()) {
    if (!value.is_number()) bad("hyper." + key, "expected a number");
    if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0) bad("hyper.seed", "expected a nonnegative integer");
      h.seed = value.get<std::uint64_t>();
      continue;
    }
    // k here is taken literally; only sweeps rescale g.
    if (key == "k") {
      if (!value.is_number_integer()) bad("hyper.k", "expected an integer");
      h.k = value.get<Index>();
      continue;
    }
    set_hyperparam(h, key, value.get<double>());
  }
}

}  // namespace

const std::vector<std::string>& hyperparam_names() {
  static const std::vector<std::string> names{"lambda1", "lambda2", "lambda3", "lambda4",
                                              "eta",     "k",       "g",       "iters_local",
                                              "iters_fed", "iters_pretrain"};
  return names;
}

void set_hyperparam(Hyperparams& h, const std::string& name, double value) {
  auto as_int = [&](double v) -> long long {
    if (!std::isfinite(v) || v != std::floor(v)) {
      throw ConfigError("hyperparameter " + name + " must be an integer, got " + io::format_double(v));
    }
    return static_cast<long long>(v);
  };
  if (name == "lambda1") h.lambda1 = value;
  else if (name == "lambda2") h.lambda2 = value;
  else if (name == "lambda3") h.lambda3 = value;
  else if (name == "lambda4") h.lambda4 = value;
  else if (name == "eta") h.eta = value;
  else if (name == "g") h.g = as_int(value);
  else if (name == "iters_local") h.iters_local = static_cast<int>(as_int(value));
  else if (name == "iters_fed") h.iters_fed = static_cast<int>(as_int(value));
  else if (name == "iters_pretrain") h.iters_pretrain = static_cast<int>(as_int(value));
  else if (name == "k") {
    const Index k = as_int(value);
    const double ratio = h.k > 0 ? static_cast<double>(h.g) / static_cast<double>(h.k) : 0.0;
    h.g = std::clamp<Index>(static_cast<Index>(std::llround(ratio * static_cast<double>(k))), 0,
                            std::max<Index>(k, 0));
    h.k = k;
  } else {
    throw ConfigError("unknown hyperparameter '" + name + "'");
  }
}

RunConfig quickstart_config() {
  RunConfig c;
  c.synthetic = profiles::quickstart_spec();
  c.hyper = profiles::quickstart_hyperparams();
  c.folds = 4;
  return c;
}

RunConfig parse_config(const json& doc) {
  check_keys(doc, "document",
             {"profile", "data", "hyper", "folds", "threads", "out", "log_level", "roi", "sweep"});
  RunConfig c;
  if (doc.contains("profile")) {
    const std::string profile = get_string(doc, "profile", "document");
    if (profile == "quickstart") c = quickstart_config();
    else if (profile != "paper") bad("profile", "expected \"paper\" or \"quickstart\", got \"" + profile + "\"");
  }

  if (doc.contains("data")) {
    const json& data = doc.at("data");
    check_keys(data, "data", {"synthetic", "sites", "truth"});
    const bool has_synth = data.contains("synthetic");
    const bool has_sites = data.contains("sites");
    if (has_synth == has_sites) bad("data", "give exactly one of \"synthetic\" or \"sites\"");
    if (has_synth) {
      io::SyntheticSpec spec = c.synthetic.value_or(io::SyntheticSpec{});
      read_synthetic(data.at("synthetic"), spec);
      c.synthetic = spec;
      c.site_dirs.clear();
      c.truth_dir.reset();
      if (data.contains("truth")) bad("data.truth", "only valid together with \"sites\"");
    } else {
      const json& sites = data.at("sites");
      if (!sites.is_array() || sites.empty()) bad("data.sites", "expected a nonempty list of directories");
      c.synthetic.reset();
      c.site_dirs.clear();
      for (const auto& s : sites) {
        if (!s.is_string()) bad("data.sites", "expected directory names");
        c.site_dirs.emplace_back(s.get<std::string>());
      }
      if (data.contains("truth")) c.truth_dir = fs::path(get_string(data, "truth", "data"));
    }
  }

  if (doc.contains("hyper")) read_hyper(doc.at("hyper"), c.hyper);
  if (doc.contains("folds")) c.folds = static_cast<int>(get_int(doc, "folds", "document"));
  if (doc.contains("threads")) {
    const long long t = get_int(doc, "threads", "document");
    if (t < 1) bad("threads", "must be at least 1");
    c.threads = static_cast<unsigned>(t);
  }
  if (doc.contains("out")) c.out = get_string(doc, "out", "document");
  if (doc.contains("log_level")) c.log_level = get_string(doc, "log_level", "document");

  if (doc.contains("roi")) {
    const json& roi = doc.at("roi");
    check_keys(roi, "roi", {"sign", "top_atoms", "top_rois"});
    if (roi.contains("sign")) {
      const std::string sign = get_string(roi, "sign", "roi");
      if (sign == "absolute") c.roi_sign = eval::RoiSign::Absolute;
      else if (sign == "signed") c.roi_sign = eval::RoiSign::Signed;
      else bad("roi.sign", "expected \"absolute\" or \"signed\"");
    }
    if (roi.contains("top_atoms")) c.top_atoms = get_int(roi, "top_atoms", "roi");
    if (roi.contains("top_rois")) c.top_rois = get_int(roi, "top_rois", "roi");
  }

  if (doc.contains("sweep")) {
    const json& sweep = doc.at("sweep");
    check_keys(sweep, "sweep", {"param", "values"});
    SweepRange range;
    range.param = get_string(sweep, "param", "sweep");
    if (!sweep.contains("values") || !sweep.at("values").is_array()) bad("sweep.values", "expected a list");
    for (const auto& v : sweep.at("values")) {
      if (!v.is_number()) bad("sweep.values", "expected numbers");
      range.values.push_back(v.get<double>());
    }
    c.sweep = range;
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json out;
  nlohmann::ordered_json data;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    data["synthetic"] = {{"d", s.d},
                         {"k_true", s.k_true},
                         {"g_true", s.g_true},
                         {"sites", s.sites},
                         {"samples_per_site", s.samples_per_site},
                         {"sparsity", s.sparsity},
                         {"noise_std", s.noise_std},
                         {"margin", s.margin},
                         {"seed", s.seed}};
  } else {
    std::vector<std::string> dirs;
    for (const auto& d : c.site_dirs) dirs.push_back(d.string());
    data["sites"] = dirs;
    if (c.truth_dir) data["truth"] = c.truth_dir->string();
  }
  out["data"] = data;
  out["hyper"] = report::to_json(c.hyper);
  out["folds"] = c.folds;
  out["threads"] = c.threads;
  out["out"] = c.out.string();
  out["log_level"] = c.log_level;
  out["roi"] = {{"sign", c.roi_sign == eval::RoiSign::Absolute ? "absolute" : "signed"},
                {"top_atoms", c.top_atoms},
                {"top_rois", c.top_rois}};
  if (c.sweep) out["sweep"] = {{"param", c.sweep->param}, {"values", c.sweep->values}};
  return out;
}

void use_data_root(RunConfig& config, const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("data directory '" + root.string() + "' does not exist");
  std::vector<fs::path> sites;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("site_", 0) == 0) {
      sites.push_back(entry.path());
    }
  }
  if (sites.empty()) throw IoError("data directory '" + root.string() + "' has no site_* subdirectories");
  std::sort(sites.begin(), sites.end());
  config.synthetic.reset();
  config.site_dirs = std::move(sites);
  config.truth_dir.reset();
  if (fs::is_directory(root / "truth")) config.truth_dir = root / "truth";
}

}  // namespace pfeddl::cli

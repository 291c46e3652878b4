#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfeddl/alignment.hpp"
#include "pfeddl/dataio.hpp"
#include "pfeddl/dl_core.hpp"
#include "pfeddl/evaluation.hpp"
#include "pfeddl/federation.hpp"
#include "pfeddl/profiles.hpp"
#include "pfeddl/report.hpp"

namespace py = pybind11;
using namespace pfeddl;

namespace {

Labels to_labels(const std::vector<int>& y) { return Labels(y); }

py::dict client_dict(const fed::ClientState& c) {
  py::dict d;
  d["site_id"] = c.site_id;
  d["D"] = c.D.atoms;
  d["g"] = c.D.global_count;
  d["S"] = c.S;
  d["w"] = c.w.w;
  d["b"] = c.w.b;
  return d;
}

std::vector<SiteInput> to_sites(const std::vector<std::pair<Matrix, std::vector<int>>>& sites) {
  std::vector<SiteInput> out;
  for (const auto& [x, y] : sites) out.push_back({x, to_labels(y)});
  return out;
}

}  // namespace

PYBIND11_MODULE(_pfeddl, m) {
  m.doc() = "Personalized federated dictionary learning core";

  auto base = py::register_exception<Error>(m, "PfeddlError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvalidArgumentError>(m, "InvalidArgumentError", base.ptr());
  py::register_exception<InvalidStateError>(m, "InvalidStateError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("lambda1", &Hyperparams::lambda1)
      .def_readwrite("lambda2", &Hyperparams::lambda2)
      .def_readwrite("lambda3", &Hyperparams::lambda3)
      .def_readwrite("lambda4", &Hyperparams::lambda4)
      .def_readwrite("eta", &Hyperparams::eta)
      .def_readwrite("k", &Hyperparams::k)
      .def_readwrite("g", &Hyperparams::g)
      .def_readwrite("iters_local", &Hyperparams::iters_local)
      .def_readwrite("iters_fed", &Hyperparams::iters_fed)
      .def_readwrite("iters_pretrain", &Hyperparams::iters_pretrain)
      .def_readwrite("seed", &Hyperparams::seed)
      .def("validate", &Hyperparams::validate)
      .def("__repr__", [](const Hyperparams& h) { return report::to_json(h).dump(); });

  py::class_<io::SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("d", &io::SyntheticSpec::d)
      .def_readwrite("k_true", &io::SyntheticSpec::k_true)
      .def_readwrite("g_true", &io::SyntheticSpec::g_true)
      .def_readwrite("sites", &io::SyntheticSpec::sites)
      .def_readwrite("samples_per_site", &io::SyntheticSpec::samples_per_site)
      .def_readwrite("sparsity", &io::SyntheticSpec::sparsity)
      .def_readwrite("noise_std", &io::SyntheticSpec::noise_std)
      .def_readwrite("margin", &io::SyntheticSpec::margin)
      .def_readwrite("seed", &io::SyntheticSpec::seed);

  m.def("quickstart_hyperparams", &profiles::quickstart_hyperparams);
  m.def("quickstart_spec", &profiles::quickstart_spec);

  // Update rules.
  m.def("soft_threshold", py::overload_cast<const Matrix&, double>(&dl::soft_threshold), py::arg("values"),
        py::arg("lam"));
  m.def(
      "update_codes_unsupervised",
      [](const Matrix& D, const Matrix& S, const Matrix& X, double eta, double eps) {
        return dl::update_codes_unsupervised(Dictionary(D, 0), S, X, eta, eps);
      },
      py::arg("D"), py::arg("S"), py::arg("X"), py::arg("eta"), py::arg("eps"));
  m.def(
      "update_dictionary",
      [](const Matrix& D, const Matrix& S, const Matrix& X, double eta, double lam_orth, double recon_weight) {
        return dl::update_dictionary(Dictionary(D, 0), S, X, eta, lam_orth, recon_weight).atoms;
      },
      py::arg("D"), py::arg("S"), py::arg("X"), py::arg("eta"), py::arg("lam_orth"),
      py::arg("recon_weight") = 1.0);
  m.def(
      "normalize_columns",
      [](const Matrix& D, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        std::vector<std::string> warnings;
        Matrix out = dl::normalize_columns(Dictionary(D, 0), rng, &warnings).atoms;
        return py::make_tuple(out, warnings);
      },
      py::arg("D"), py::arg("seed") = 0);
  m.def(
      "classification_loss",
      [](const std::vector<int>& y, const Matrix& S, const Vector& w, double b) {
        return dl::classification_loss(to_labels(y), S, {w, b});
      },
      py::arg("Y"), py::arg("S"), py::arg("w"), py::arg("b") = 0.0);
  m.def(
      "update_classifier",
      [](const Vector& w, double b, const std::vector<int>& y, const Matrix& S, double eta, double lam3) {
        ClassifierWeights out = dl::update_classifier({w, b}, to_labels(y), S, eta, lam3);
        return py::make_tuple(out.w, out.b);
      },
      py::arg("w"), py::arg("b"), py::arg("Y"), py::arg("S"), py::arg("eta"), py::arg("lam3"));
  m.def(
      "update_codes_supervised",
      [](const Matrix& S, const Matrix& D, const Matrix& X, const std::vector<int>& y, const Vector& w,
         double b, const Hyperparams& h) {
        return dl::update_codes_supervised(S, Dictionary(D, 0), X, to_labels(y), {w, b}, h);
      },
      py::arg("S"), py::arg("D"), py::arg("X"), py::arg("Y"), py::arg("w"), py::arg("b"), py::arg("hyper"));
  m.def(
      "objective_site",
      [](const Matrix& X, const std::vector<int>& y, const Matrix& D, const Matrix& S, const Vector& w,
         double b, const Hyperparams& h) {
        return dl::objective_site(X, to_labels(y), Dictionary(D, 0), S, {w, b}, h);
      },
      py::arg("X"), py::arg("Y"), py::arg("D"), py::arg("S"), py::arg("w"), py::arg("b"), py::arg("hyper"));
  m.def(
      "pretrain_local",
      [](const Matrix& X, const Hyperparams& h) {
        dl::PretrainResult r = dl::pretrain_local(X, h);
        py::dict d;
        d["D"] = r.dictionary.atoms;
        d["S"] = r.codes;
        d["objective_trace"] = r.objective_trace;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("X"), py::arg("hyper"));

  // Alignment.
  m.def(
      "atom_edge_weight",
      [](const Vector& a, const Vector& b) {
        const align::EdgeWeight e = align::atom_edge_weight(a, b);
        return py::make_tuple(e.weight, e.sign);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "apply_signed_permutation",
      [](const Matrix& D, const Matrix& S, const std::vector<Index>& sources, const std::vector<int>& signs) {
        auto [dp, sp] = align::apply_signed_permutation(Dictionary(D, 0), S,
                                                        align::SignedPermutation(sources, signs));
        return py::make_tuple(dp.atoms, sp);
      },
      py::arg("D"), py::arg("S"), py::arg("sources"), py::arg("signs"));
  m.def(
      "global_alignment",
      [](const std::vector<Matrix>& dicts, const std::vector<Matrix>& codes) {
        std::vector<Dictionary> ds;
        for (const auto& d : dicts) ds.emplace_back(d, 0);
        align::AlignmentResult r = align::global_alignment(ds, codes);
        py::list aligned;
        for (const auto& d : r.dictionaries) aligned.append(d.atoms);
        py::list perms;
        for (const auto& p : r.permutations) perms.append(py::make_tuple(p.sources(), p.signs()));
        py::list weights;
        for (const auto& path : r.record.rounds) weights.append(path.weight);
        py::dict d;
        d["dictionaries"] = aligned;
        d["codes"] = r.codes;
        d["permutations"] = perms;
        d["round_weights"] = weights;
        d["total_weight"] = r.record.total_weight();
        return d;
      },
      py::arg("dictionaries"), py::arg("codes"));

  // Federation.
  m.def("aggregation_weights", &fed::aggregation_weights, py::arg("sizes"));
  m.def("aggregate_global", &fed::aggregate_global, py::arg("parts"), py::arg("sizes"));
  m.def(
      "run_pfeddl",
      [](const std::vector<std::pair<Matrix, std::vector<int>>>& sites, const Hyperparams& h, unsigned threads) {
        fed::RunOptions options;
        options.threads = threads;
        fed::FederationRun run;
        {
          py::gil_scoped_release release;
          run = fed::run_pfeddl(to_sites(sites), h, options);
        }
        py::list clients;
        for (const auto& c : run.clients) clients.append(client_dict(c));
        py::list rounds;
        for (const auto& r : run.rounds) rounds.append(py::str(report::round_to_json(r, -1, false).dump()));
        py::dict d;
        d["clients"] = clients;
        d["rounds"] = rounds;
        d["alignment_total_weight"] = run.alignment.record.total_weight();
        d["warnings"] = run.warnings;
        return d;
      },
      py::arg("sites"), py::arg("hyper"), py::arg("threads") = 1);

  // Data.
  m.def(
      "generate_synthetic_federation",
      [](const io::SyntheticSpec& spec) {
        io::SyntheticFederation f = io::generate_synthetic_federation(spec);
        py::list sites;
        for (const auto& s : f.sites) sites.append(py::make_tuple(s.X, s.Y.values()));
        py::dict truth;
        truth["global_atoms"] = f.truth.global_atoms;
        truth["local_atoms"] = f.truth.local_atoms;
        truth["codes"] = f.truth.codes;
        truth["classifier_directions"] = f.truth.classifier_directions;
        return py::make_tuple(sites, truth);
      },
      py::arg("spec"));
  m.def("pearson_fisher_features", &io::pearson_fisher_features, py::arg("timeseries"));
  m.def("vectorize_lower_triangle", &io::vectorize_lower_triangle, py::arg("symmetric"));
  m.def("devectorize_lower_triangle", &io::devectorize_lower_triangle, py::arg("features"), py::arg("roi_count"));
  m.def("save_matrix", [](const std::string& path, const Matrix& x) { io::save_matrix(path, x); });
  m.def("load_matrix", [](const std::string& path) { return io::load_matrix(path); });

  // Evaluation.
  m.def(
      "kfold_split",
      [](const std::vector<Index>& n, int folds, std::uint64_t seed) {
        eval::FoldSplit split = eval::kfold_split(n, folds, seed);
        py::list sites;
        for (const auto& site : split.sites) {
          py::list fs;
          for (const auto& f : site) fs.append(py::make_tuple(f.train, f.test));
          sites.append(fs);
        }
        return sites;
      },
      py::arg("n_per_site"), py::arg("folds") = 4, py::arg("seed") = 0);
  m.def(
      "encode_test_samples",
      [](const Matrix& D, const Matrix& X, const Hyperparams& h) {
        return eval::encode_test_samples(Dictionary(D, 0), X, h);
      },
      py::arg("D"), py::arg("X"), py::arg("hyper"));
  m.def(
      "predict",
      [](const Vector& w, double b, const Matrix& S) { return eval::predict({w, b}, S).values(); },
      py::arg("w"), py::arg("b"), py::arg("S"));
  m.def(
      "accuracy",
      [](const std::vector<int>& p, const std::vector<int>& t) { return eval::accuracy(to_labels(p), to_labels(t)); },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "roi_importance",
      [](const Matrix& D, const Vector& w, Index m, Index top_atoms, Index top_rois, bool signed_sum) {
        eval::RoiImportance r = eval::roi_importance(Dictionary(D, 0), {w, 0.0}, eval::RoiCount{m}, top_atoms, top_rois,
                                                     signed_sum ? eval::RoiSign::Signed : eval::RoiSign::Absolute);
        py::dict d;
        d["scores"] = r.scores;
        d["top_rois"] = r.top_rois;
        d["top_atoms"] = r.top_atoms;
        return d;
      },
      py::arg("D"), py::arg("w"), py::arg("roi_count"), py::arg("top_atoms") = 10, py::arg("top_rois") = 10,
      py::arg("signed_sum") = false);
  m.def(
      "run_experiment_json",
      [](const std::vector<std::pair<Matrix, std::vector<int>>>& sites, const Hyperparams& h, int folds,
         unsigned threads, std::optional<Matrix> planted_global) {
        eval::ExperimentConfig config;
        config.sites = to_sites(sites);
        config.hyper = h;
        config.folds = folds;
        config.run_options.threads = threads;
        if (planted_global) {
          io::GroundTruth truth;
          truth.global_atoms = *planted_global;
          config.truth = truth;
        }
        py::gil_scoped_release release;
        return report::to_json(eval::run_experiment(config)).dump();
      },
      py::arg("sites"), py::arg("hyper"), py::arg("folds") = 4, py::arg("threads") = 1,
      py::arg("planted_global") = py::none());
}

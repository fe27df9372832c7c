#include "dna/analysis.hpp"
#include "dna/core.hpp"
#include "dna/errors.hpp"
#include "dna/extraction.hpp"
#include "dna/phylo.hpp"
#include "dna/routing.hpp"
#include "dna/svm.hpp"
#include "dna/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dna;

namespace {

DistanceMatrix to_matrix(const std::vector<std::string>& labels, const Matrix& m) {
    DistanceMatrix d{labels, m};
    d.validate();
    return d;
}

FunctionalRepresentation make_rep(std::string model_id, std::vector<double> values, std::size_t p,
                                  std::string prompt_set_hash) {
    FunctionalRepresentation r;
    r.model_id = std::move(model_id);
    r.prompt_set_hash = std::move(prompt_set_hash);
    r.p = p;
    r.t = p ? values.size() / p : 0;
    r.values = std::move(values);
    r.validate();
    return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DNA extraction and analysis core";
    m.attr("__version__") = DNA_VERSION;

    auto base = py::register_exception<Error>(m, "DnaError");
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ProvenanceError>(m, "ProvenanceError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    py::class_<JlPlan>(m, "JlPlan")
        .def_readonly("c1", &JlPlan::c1)
        .def_readonly("c2", &JlPlan::c2)
        .def_readonly("epsilon", &JlPlan::epsilon)
        .def_readonly("alpha", &JlPlan::alpha)
        .def_readonly("K", &JlPlan::K)
        .def_readonly("L", &JlPlan::L);
    m.def("plan_from_constants", &plan_from_constants, py::arg("c1"), py::arg("c2"), py::arg("K"));
    m.def("jl_dimension", &jl_dimension, py::arg("epsilon"), py::arg("K"));

    py::class_<ConcentrationPlan>(m, "ConcentrationPlan")
        .def_readonly("epsilon", &ConcentrationPlan::epsilon)
        .def_readonly("delta", &ConcentrationPlan::delta)
        .def_readonly("c_max", &ConcentrationPlan::c_max)
        .def_readonly("t", &ConcentrationPlan::t);
    m.def("hoeffding_sample_size", &hoeffding_sample_size, py::arg("epsilon"), py::arg("delta"), py::arg("c_max"));
    m.def("hoeffding_tail", &hoeffding_tail, py::arg("t"), py::arg("epsilon"), py::arg("c_max"));

    py::class_<FunctionalRepresentation>(m, "FunctionalRepresentation")
        .def(py::init(&make_rep), py::arg("model_id"), py::arg("values"), py::arg("p"),
             py::arg("prompt_set_hash") = "py")
        .def_readonly("model_id", &FunctionalRepresentation::model_id)
        .def_readonly("p", &FunctionalRepresentation::p)
        .def_readonly("t", &FunctionalRepresentation::t)
        .def_readonly("values", &FunctionalRepresentation::values);

    py::class_<ProjectionSpec>(m, "ProjectionSpec")
        .def_static("standard", &ProjectionSpec::standard, py::arg("seed"), py::arg("L"), py::arg("D"))
        .def_readonly("seed", &ProjectionSpec::seed)
        .def_readonly("L", &ProjectionSpec::L)
        .def_readonly("D", &ProjectionSpec::D)
        .def_readonly("entry_std", &ProjectionSpec::entry_std)
        .def("fingerprint", &ProjectionSpec::fingerprint);

    m.def(
        "projection_matrix", [](const ProjectionSpec& s) { return sample_projection(s).values; }, py::arg("spec"));

    py::class_<DnaRecord>(m, "DnaRecord")
        .def_readonly("model_id", &DnaRecord::model_id)
        .def_readonly("vector", &DnaRecord::vector)
        .def_readonly("alpha", &DnaRecord::alpha)
        .def_readonly("embedder_id", &DnaRecord::embedder_id)
        .def_readonly("prompt_set_hash", &DnaRecord::prompt_set_hash)
        .def_readonly("created_at", &DnaRecord::created_at)
        .def_readonly("projection", &DnaRecord::projection);

    m.def(
        "project", [](const FunctionalRepresentation& r, const ProjectionSpec& s, double alpha) {
            return project_streaming(r, s, alpha);
        },
        py::arg("rep"), py::arg("spec"), py::arg("alpha") = 1.0);
    m.def("functional_distance", &functional_distance);
    m.def("dna_distance", &dna_distance);

    m.def(
        "load_store", [](const std::filesystem::path& dir) { return load_store(dir).records(); }, py::arg("dir"),
        "Records of a DNA store, in insertion order.");

    m.def(
        "distance_matrix",
        [](const std::filesystem::path& dir) {
            const auto d = distance_matrix(load_store(dir));
            return py::make_tuple(d.labels, d.m);
        },
        py::arg("dir"));

    py::class_<MantelResult>(m, "MantelResult")
        .def_readonly("r", &MantelResult::r)
        .def_readonly("p_value", &MantelResult::p_value)
        .def_readonly("permutations", &MantelResult::permutations);
    m.def(
        "mantel_test",
        [](const std::vector<std::string>& labels, const Matrix& a, const Matrix& b, std::size_t permutations,
           std::uint64_t seed) { return mantel_test(to_matrix(labels, a), to_matrix(labels, b), permutations, seed); },
        py::arg("labels"), py::arg("a"), py::arg("b"), py::arg("permutations") = 999, py::arg("seed") = 0);

    m.def(
        "nj_tree",
        [](const std::vector<std::string>& labels, const Matrix& d, bool rooted) {
            auto t = neighbor_joining(to_matrix(labels, d));
            if (rooted) t = midpoint_root(t);
            return to_newick(t);
        },
        py::arg("labels"), py::arg("distances"), py::arg("midpoint_root") = true,
        "Neighbor-Joining tree as canonical Newick.");
    m.def(
        "robinson_foulds",
        [](const std::string& a, const std::string& b) { return robinson_foulds(parse_newick(a), parse_newick(b)); },
        py::arg("newick_a"), py::arg("newick_b"));
    m.def(
        "newick_path_lengths",
        [](const std::string& s) {
            const auto d = parse_newick(s).path_lengths();
            return py::make_tuple(d.labels, d.m);
        },
        py::arg("newick"));

    m.def("roc_auc", &roc_auc, py::arg("scores"), py::arg("truth"));

    py::class_<SvmModel>(m, "SvmModel")
        .def_readonly("bias", &SvmModel::bias)
        .def_readonly("gamma", &SvmModel::gamma)
        .def_readonly("dual_coef", &SvmModel::dual_coef)
        .def_readonly("support_indices", &SvmModel::support_indices)
        .def_readonly("converged", &SvmModel::converged)
        .def(
            "decision_function",
            [](const SvmModel& model, const std::vector<std::vector<double>>& X) {
                std::vector<double> out;
                for (const auto& x : X) out.push_back(svm_predict(model, x).score);
                return out;
            },
            py::arg("X"));
    m.def(
        "svm_train",
        [](const std::vector<std::vector<double>>& X, const std::vector<int>& y, double C, std::optional<double> gamma,
           double tol, std::uint64_t seed) {
            SvmParams p;
            p.C = C;
            p.gamma = gamma;
            p.tol = tol;
            p.seed = seed;
            return svm_train(X, y, p);
        },
        py::arg("X"), py::arg("y"), py::arg("C") = 1.0, py::arg("gamma") = py::none(), py::arg("tol") = 1e-3,
        py::arg("seed") = 0);

    py::class_<DistortionExperiment>(m, "DistortionExperiment")
        .def_readonly("L", &DistortionExperiment::L)
        .def_readonly("successes", &DistortionExperiment::successes)
        .def_readonly("violations_per_seed", &DistortionExperiment::violations_per_seed)
        .def_readonly("min_ratio_per_seed", &DistortionExperiment::min_ratio_per_seed)
        .def_readonly("max_ratio_per_seed", &DistortionExperiment::max_ratio_per_seed);
    m.def("run_distortion_experiment", &run_distortion_experiment, py::arg("K"), py::arg("D"), py::arg("epsilon"),
          py::arg("seeds"), py::arg("base_seed") = 0, py::arg("L") = 0);

    m.def(
        "family_representations",
        [](std::uint64_t seed, std::size_t n_families, std::size_t per_family, std::size_t dim, double centroid_scale,
           double within_noise) {
            SyntheticFamilySpec s{seed, n_families, per_family, dim, centroid_scale, within_noise, false};
            auto f = make_family_representations(s);
            return py::make_tuple(f.reps, f.families);
        },
        py::arg("seed"), py::arg("n_families"), py::arg("per_family"), py::arg("dim"), py::arg("centroid_scale") = 1.0,
        py::arg("within_noise") = 0.1);
}

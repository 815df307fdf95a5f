#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ablab/checkpoint.hpp"
#include "ablab/gradcheck_suite.hpp"
#include "ablab/pipeline.hpp"

namespace py = pybind11;
using namespace ablab;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    py::array_t<double> out({t.rows(), t.cols()});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array of samples");
    const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
    return Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

Prompt parse_prompt(const Vocabulary& v, const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    for (std::string w; in >> w;) words.push_back(w);
    return make_prompt(v, words);
}

py::dict score_dict(const AlignmentScore& s) {
    py::dict d;
    d["posterior"] = s.posterior;
    d["posterior_stderr"] = s.posterior_stderr;
    d["raw"] = s.raw;
    d["raw_stderr"] = s.raw_stderr;
    d["n"] = s.n;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Concept ablation on a synthetic conditional diffusion model";
    m.attr("__version__") = kToolVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("load", &Vocabulary::load, py::arg("path"))
        .def_static("parse", &Vocabulary::parse, py::arg("yaml_text"))
        .def_property_readonly("data_dim", &Vocabulary::data_dim)
        .def_property_readonly("tokens",
                               [](const Vocabulary& v) {
                                   std::vector<std::string> names;
                                   for (const auto& t : v.tokens()) names.push_back(t.name);
                                   return names;
                               })
        .def("kind", [](const Vocabulary& v, const std::string& name) { return kind_name(v.token(v.id(name)).kind); })
        .def("__len__", &Vocabulary::size);

    py::class_<ExperimentConfig>(m, "Config")
        .def_static("load", &parse_config, py::arg("path"))
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("pretrain_seed", &ExperimentConfig::pretrain_seed)
        .def_readwrite("output_dir", &ExperimentConfig::output_dir)
        .def_readwrite("cache_dir", &ExperimentConfig::cache_dir)
        .def_property_readonly("vocabulary", [](const ExperimentConfig& c) { return c.vocab; })
        .def("hash", &ExperimentConfig::hash)
        .def("canonical", &ExperimentConfig::canonical);

    py::class_<Denoiser>(m, "Denoiser")
        .def_property_readonly("config",
                               [](const Denoiser& d) {
                                   const auto& c = d.config();
                                   py::dict out;
                                   out["data_dim"] = c.data_dim;
                                   out["vocab_size"] = c.vocab_size;
                                   out["embed_dim"] = c.embed_dim;
                                   out["attn_dim"] = c.attn_dim;
                                   out["hidden_dim"] = c.hidden_dim;
                                   out["head_hidden"] = c.head_hidden;
                                   out["time_freqs"] = c.time_freqs;
                                   out["horizon"] = c.horizon;
                                   return out;
                               })
        .def(
            "sample",
            [](const Denoiser& d, const Vocabulary& v, const std::string& prompt, std::size_t n,
               std::uint64_t seed) {
                const Prompt p = parse_prompt(v, prompt);
                const NoiseSchedule sched = build_schedule(d.config().horizon, 1e-3, 0.2);
                Rng rng(seed);
                Tensor x;
                {
                    py::gil_scoped_release release;
                    x = ddpm_sample(d, p.tokens, sched, n, rng);
                }
                return to_numpy(x);
            },
            py::arg("vocabulary"), py::arg("prompt"), py::arg("n"), py::arg("seed"))
        .def("identical", [](const Denoiser& a, const Denoiser& b) { return a.params().identical(b.params()); });

    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));

    m.def(
        "sample_ground_truth",
        [](const Vocabulary& v, const std::string& prompt, std::size_t n, std::uint64_t seed) {
            Rng rng(seed);
            return to_numpy(sample_ground_truth(v, parse_prompt(v, prompt), n, rng));
        },
        py::arg("vocabulary"), py::arg("prompt"), py::arg("n"), py::arg("seed"));

    m.def(
        "alignment_score",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples, const Vocabulary& v,
           const std::string& concept_prompt, const std::vector<std::string>& candidates) {
            std::vector<Prompt> ps;
            for (const auto& c : candidates) ps.push_back(parse_prompt(v, c));
            return score_dict(
                alignment_score(from_numpy(samples), parse_prompt(v, concept_prompt), CandidateSet::full(v, ps)));
        },
        py::arg("samples"), py::arg("vocabulary"), py::arg("concept"), py::arg("candidates"));

    m.def(
        "run_pipeline",
        [](const ExperimentConfig& cfg) {
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_pipeline(cfg);
            }
            py::dict out;
            out["output_dir"] = cfg.output_dir.string();
            out["config_hash"] = r.manifest.config_hash;
            out["baseline_from_cache"] = r.manifest.baseline_from_cache;
            out["artifacts"] = r.manifest.artifacts;
            py::dict methods;
            for (const auto& run : r.runs) {
                py::dict scores;
                for (const auto& s : run.report.scores) {
                    const std::string key = s.text + "/" + tag_name(s.tag);
                    scores[py::str(key)] = score_dict(s.score);
                }
                methods[method_name(run.method)] = scores;
            }
            out["scores"] = methods;
            out["verdict"] = r.comparison ? py::object(py::str(verdict_name(r.comparison->verdict))) : py::none();
            return out;
        },
        py::arg("config"));

    m.def("gradcheck", [] {
        auto rows = op_gradcheck_suite();
        auto losses = loss_gradcheck_suite();
        rows.insert(rows.end(), losses.begin(), losses.end());
        std::vector<std::tuple<std::string, double, double>> out;
        for (const auto& r : rows) out.emplace_back(r.name, r.max_rel_error, r.threshold);
        return out;
    });
}

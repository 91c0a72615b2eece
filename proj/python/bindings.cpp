#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "shotweave/error.hpp"
#include "shotweave/eval.hpp"
#include "shotweave/pipeline.hpp"
#include "shotweave/serve.hpp"
#include "shotweave/storyboard.hpp"
#include "shotweave/synth_tracks.hpp"
#include "shotweave/taxonomy.hpp"
#include "shotweave/transition.hpp"

namespace py = pybind11;
using namespace shotweave;
using nlohmann::json;

// Structured values cross the boundary as JSON text; the Python package
// decodes them.
namespace {

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("invalid JSON argument: ") + e.what());
    }
}

Taxonomy taxonomy_arg(const std::string& text) { return text.empty() ? default_taxonomy() : load_taxonomy(parse(text)); }

std::string plan(std::size_t n, std::uint64_t seed, const std::string& taxonomy) {
    const BalancePlan p = generate_plan(n, taxonomy_arg(taxonomy), seed);
    json entries = json::array();
    for (const auto& e : p.entries) {
        entries.push_back(to_json(e));
    }
    return json{{"entries", std::move(entries)}, {"report", to_json(p.report)}}.dump();
}

std::string transition(const std::string& tracks, const std::string& params_doc) {
    const TrackSet ts = ingest_tracks(parse(tracks));
    const TransitionParams params = transition_params_from_json(params_doc.empty() ? json::object() : parse(params_doc));
    params.validate();
    const TransitionPlan p = plan_transition(ts, params);
    const CutList cuts =
        stitch_timeline(p, {"clip_a", ts.clip_a_len}, {"transition", params.T}, {"clip_b", ts.clip_b_len});
    return json{{"cut_a", p.cut_a},
                {"cut_b", p.cut_b},
                {"control_field", to_json(p.field)},
                {"cut_list", to_json(cuts)},
                {"warnings", p.warnings}}
        .dump();
}

std::string synth(const std::string& profile, int n_points, std::uint64_t seed) {
    const SynthResult r = synth_tracks(motion_profile_from_json(parse(profile)), n_points, seed);
    json doc = to_json(r.tracks);
    doc["truth"] = {{"stall_a", r.truth.stall_a}, {"stall_b", r.truth.stall_b}};
    return doc.dump();
}

std::string routing(const std::string& scores, const std::vector<std::string>& tie_break) {
    const ScoreMatrix m = scores.empty() ? default_score_matrix() : load_score_matrix(parse(scores));
    return to_json(build_routing(m, TieBreakPolicy{tie_break})).dump();
}

std::string llm_audit(const std::string& audits) {
    std::vector<ModelAudit> in;
    for (const auto& a : parse(audits)) {
        ModelAudit m{a.at("model_id").get<std::string>(), {}};
        for (const auto& f : a.at("fields")) {
            m.fields.push_back({f.at("field").get<std::string>(), f.at("accuracy").get<double>(), f.value("variance", 0.0)});
        }
        in.push_back(std::move(m));
    }
    json rows = json::array();
    for (const auto& r : summarize_llm_audit(in)) {
        json fields = json::array();
        for (const auto& f : r.fields) {
            fields.push_back({{"field", f.field}, {"accuracy", f.accuracy}, {"variance", f.variance}});
        }
        rows.push_back({{"model_id", r.model_id}, {"fields", std::move(fields)}, {"average", r.average}});
    }
    return rows.dump();
}

std::map<std::string, double> rankings_win_rate(const std::vector<std::vector<std::string>>& orders) {
    std::vector<Ranking> rankings;
    for (const auto& o : orders) {
        rankings.push_back({"", "", o});
    }
    return win_rate(rankings);
}

class PyPipeline {
public:
    PyPipeline(const std::string& store, std::uint64_t seed, const std::vector<std::string>& gates) {
        PipelineConfig cfg = mock_pipeline_config(store, seed);
        for (const auto& g : gates) {
            cfg.gates.insert(stage_from_string(g));
        }
        pipeline_ = std::make_unique<Pipeline>(std::move(cfg));
    }

    static std::unique_ptr<PyPipeline> from_config(const std::string& path) {
        auto p = std::unique_ptr<PyPipeline>(new PyPipeline());
        p->pipeline_ = std::make_unique<Pipeline>(load_pipeline_config_file(path));
        return p;
    }

    std::string run(const std::string& signals, const std::string& stop_after) {
        RunOptions options;
        if (!stop_after.empty()) {
            options.stop_after = stage_from_string(stop_after);
        }
        py::gil_scoped_release release;
        return run_summary(pipeline_->run_sample(signals_from_json(parse(signals)), options)).dump();
    }

    std::string batch(const std::string& samples, int parallelism) {
        std::vector<ControlSignals> in;
        for (const auto& s : parse(samples)) {
            in.push_back(signals_from_json(s));
        }
        py::gil_scoped_release release;
        return to_json(pipeline_->run_batch(in, parallelism)).dump();
    }

    std::string resume(const std::string& run_id) {
        py::gil_scoped_release release;
        return run_summary(pipeline_->resume(run_id)).dump();
    }

    std::string status(const std::string& run_id) { return run_detail(*pipeline_, pipeline_->store().load(run_id)).dump(); }
    std::vector<std::string> runs() const { return pipeline_->store().list(); }

    std::string approve(const std::string& run_id, const std::string& stage) {
        return run_summary(pipeline_->approve(run_id, stage_from_string(stage))).dump();
    }
    std::string reject(const std::string& run_id, const std::string& stage, const std::string& edit) {
        return run_summary(pipeline_->reject(run_id, stage_from_string(stage), edit.empty() ? json::object() : parse(edit)))
            .dump();
    }
    std::string regenerate(const std::string& run_id, const std::string& stage) {
        py::gil_scoped_release release;
        return run_summary(pipeline_->regenerate(run_id, stage_from_string(stage))).dump();
    }
    std::string advance(const std::string& run_id) {
        py::gil_scoped_release release;
        return run_summary(pipeline_->advance(run_id)).dump();
    }

    std::string manifest() const { return to_json(pipeline_->export_manifest()).dump(); }
    std::string read_artifact(const std::string& digest) const { return pipeline_->store().artifacts().read(digest); }

private:
    PyPipeline() = default;
    std::unique_ptr<Pipeline> pipeline_;
};

}  // namespace

PYBIND11_MODULE(_shotweave, m) {
    m.doc() = "shotweave core bindings";

    // Translators run newest first, so the base class goes in first.
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());
    py::register_exception<ConflictError>(m, "ConflictError", base.ptr());

    m.def("default_taxonomy", [] { return to_json(default_taxonomy()).dump(); });
    m.def("generate_plan", &plan, py::arg("n"), py::arg("seed") = 0, py::arg("taxonomy") = "");
    m.def("hermite_position",
          [](std::pair<double, double> p0, std::pair<double, double> v0, std::pair<double, double> p1,
             std::pair<double, double> v1, double t) {
              const Vec2 p = hermite_position({{p0.first, p0.second}, {v0.first, v0.second}},
                                              {{p1.first, p1.second}, {v1.first, v1.second}}, t);
              return std::make_pair(p.x, p.y);
          },
          py::arg("p0"), py::arg("v0"), py::arg("p1"), py::arg("v1"), py::arg("t"));
    m.def("plan_transition", &transition, py::arg("tracks"), py::arg("params") = "");
    m.def("synth_tracks", &synth, py::arg("profile"), py::arg("n_points"), py::arg("seed"));
    m.def("build_routing", &routing, py::arg("scores") = "",
          py::arg("tie_break") = std::vector<std::string>{"scene_preservation"});
    m.def("summarize_llm_audit", &llm_audit, py::arg("audits"));
    m.def("win_rate", &rankings_win_rate, py::arg("orders"));
    m.def("round_half_up", &round_half_up, py::arg("value"), py::arg("decimals") = 1);

    py::class_<PyPipeline>(m, "Pipeline")
        .def(py::init<const std::string&, std::uint64_t, const std::vector<std::string>&>(), py::arg("store"),
             py::arg("seed") = 0, py::arg("gates") = std::vector<std::string>{})
        .def_static("from_config", &PyPipeline::from_config, py::arg("path"))
        .def("run", &PyPipeline::run, py::arg("signals"), py::arg("stop_after") = "")
        .def("batch", &PyPipeline::batch, py::arg("samples"), py::arg("parallelism") = 0)
        .def("resume", &PyPipeline::resume, py::arg("run_id"))
        .def("advance", &PyPipeline::advance, py::arg("run_id"))
        .def("status", &PyPipeline::status, py::arg("run_id"))
        .def("runs", &PyPipeline::runs)
        .def("approve", &PyPipeline::approve, py::arg("run_id"), py::arg("stage"))
        .def("reject", &PyPipeline::reject, py::arg("run_id"), py::arg("stage"), py::arg("edit") = "")
        .def("regenerate", &PyPipeline::regenerate, py::arg("run_id"), py::arg("stage"))
        .def("manifest", &PyPipeline::manifest)
        .def("read_artifact",
             [](const PyPipeline& p, const std::string& digest) { return py::bytes(p.read_artifact(digest)); },
             py::arg("digest"));
}

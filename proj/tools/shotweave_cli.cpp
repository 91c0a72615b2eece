#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "shotweave/error.hpp"
#include "shotweave/eval.hpp"
#include "shotweave/pipeline.hpp"
#include "shotweave/serve.hpp"
#include "shotweave/synth_tracks.hpp"
#include "shotweave/taxonomy.hpp"
#include "shotweave/transition.hpp"

namespace fs = std::filesystem;
using namespace shotweave;
using nlohmann::json;

namespace {

struct StoreOptions {
    std::string config;
    std::string store;
    std::uint64_t seed = 0;
};

void add_store_options(CLI::App* cmd, StoreOptions& o) {
    cmd->add_option("-c,--config", o.config, "Pipeline config JSON (mock endpoints when omitted)");
    cmd->add_option("--store", o.store, "Run store directory (overrides the config)");
    cmd->add_option("--seed", o.seed, "Root seed when no config is given");
}

PipelineConfig pipeline_config(const StoreOptions& o) {
    if (!o.config.empty()) {
        PipelineConfig cfg = load_pipeline_config_file(o.config);
        if (!o.store.empty()) {
            cfg.store_root = o.store;
        }
        return cfg;
    }
    return mock_pipeline_config(o.store.empty() ? "shotweave-store" : o.store, o.seed);
}

void emit(const json& doc, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    const fs::path path(out);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream f(path);
    if (!f) {
        throw Error("cannot write " + out);
    }
    f << doc.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open " + path);
    }
    return in;
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shotweave: multi-shot video generation pipeline"};
    app.require_subcommand(1);

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "Draw a balanced plan of control signals");
    std::size_t plan_n = 17;
    std::uint64_t plan_seed = 0;
    std::string plan_taxonomy, plan_out, plan_report;
    plan_cmd->add_option("-n,--count", plan_n, "Number of samples")->required();
    plan_cmd->add_option("--seed", plan_seed, "Plan seed");
    plan_cmd->add_option("--taxonomy", plan_taxonomy, "Taxonomy config JSON");
    plan_cmd->add_option("-o,--out", plan_out, "Output JSONL (stdout when omitted)");
    plan_cmd->add_option("--report", plan_report, "Write the balance report here");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run one sample through the pipeline");
    StoreOptions run_store;
    std::string run_signals, run_id, run_stop;
    add_store_options(run_cmd, run_store);
    run_cmd->add_option("--signals", run_signals, "Control signals: inline JSON or a file path")->required();
    run_cmd->add_option("--run-id", run_id, "Run id (defaults to the sample id)");
    run_cmd->add_option("--stop-after", run_stop, "Halt after this stage");

    // batch
    auto* batch_cmd = app.add_subcommand("batch", "Run every sample of a plan");
    StoreOptions batch_store;
    std::string batch_plan;
    int batch_parallelism = 0;
    add_store_options(batch_cmd, batch_store);
    batch_cmd->add_option("--plan", batch_plan, "Plan JSONL")->required();
    batch_cmd->add_option("-j,--parallelism", batch_parallelism, "Samples in flight (config value when 0)");

    // resume
    auto* resume_cmd = app.add_subcommand("resume", "Continue a run from its last checkpoint");
    StoreOptions resume_store;
    std::string resume_id;
    add_store_options(resume_cmd, resume_store);
    resume_cmd->add_option("run_id", resume_id, "Run id")->required();

    // status
    auto* status_cmd = app.add_subcommand("status", "List runs, or show one");
    StoreOptions status_store;
    std::string status_id;
    add_store_options(status_cmd, status_store);
    status_cmd->add_option("run_id", status_id, "Run id");

    // gate actions
    auto* gate_cmd = app.add_subcommand("gate", "Approve, reject or regenerate a held stage");
    StoreOptions gate_store;
    std::string gate_action, gate_id, gate_stage, gate_edit, gate_actor = "operator";
    add_store_options(gate_cmd, gate_store);
    gate_cmd->add_option("action", gate_action, "approve | reject | regenerate")
        ->required()
        ->check(CLI::IsMember({"approve", "reject", "regenerate"}));
    gate_cmd->add_option("run_id", gate_id, "Run id")->required();
    gate_cmd->add_option("stage", gate_stage, "Stage name")->required();
    gate_cmd->add_option("--edit", gate_edit, "Reject edit document (inline JSON)");
    gate_cmd->add_option("--actor", gate_actor, "Recorded actor");

    // export
    auto* export_cmd = app.add_subcommand("export", "Write the manifest of finished runs");
    StoreOptions export_store;
    std::string export_out;
    add_store_options(export_cmd, export_store);
    export_cmd->add_option("-o,--out", export_out, "Manifest JSON (stdout when omitted)");

    // transition
    auto* tr_cmd = app.add_subcommand("transition", "Plan a transition from a track file");
    std::string tr_tracks, tr_out;
    TransitionParams tr_params;
    tr_cmd->add_option("--tracks", tr_tracks, "Merged track document")->required();
    tr_cmd->add_option("--window", tr_params.window, "Truncation window (1-30)");
    tr_cmd->add_option("--tau", tr_params.tau, "Frozen-motion threshold in pixels");
    tr_cmd->add_option("--k-fit", tr_params.k_fit, "Samples in the velocity fit");
    tr_cmd->add_option("--T", tr_params.T, "Transition frames");
    tr_cmd->add_option("--K", tr_params.K, "Control points");
    tr_cmd->add_option("-o,--out", tr_out, "Output JSON (stdout when omitted)");

    // mock-tracks
    auto* mt_cmd = app.add_subcommand("mock-tracks", "Write a synthetic track document");
    MotionProfile mt_profile;
    int mt_points = 24;
    std::uint64_t mt_seed = 1;
    std::string mt_out, mt_profile_file;
    mt_cmd->add_option("--profile", mt_profile_file, "Motion profile JSON");
    mt_cmd->add_option("--angle-a", mt_profile.clip_a.angle_deg, "Clip A direction in degrees");
    mt_cmd->add_option("--angle-b", mt_profile.clip_b.angle_deg, "Clip B direction in degrees");
    mt_cmd->add_option("--stall-a", mt_profile.clip_a.stall_frames, "Frozen frames before the anchor");
    mt_cmd->add_option("--stall-b", mt_profile.clip_b.stall_frames, "Frozen frames after the anchor");
    mt_cmd->add_option("--length-a", mt_profile.clip_a.length, "Clip A frames");
    mt_cmd->add_option("--length-b", mt_profile.clip_b.length, "Clip B frames");
    mt_cmd->add_option("--points", mt_points, "Tracked points");
    mt_cmd->add_option("--seed", mt_seed, "Seed");
    mt_cmd->add_option("-o,--out", mt_out, "Output JSON (stdout when omitted)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Aggregate annotation exports");
    std::string ev_ratings, ev_binary, ev_rankings, ev_audits, ev_out;
    eval_cmd->add_option("--ratings", ev_ratings, "Rating records JSONL");
    eval_cmd->add_option("--binary", ev_binary, "Binary correctness labels JSONL");
    eval_cmd->add_option("--rankings", ev_rankings, "Preference rankings JSONL");
    eval_cmd->add_option("--audits", ev_audits, "Per-model field accuracies JSONL");
    eval_cmd->add_option("-o,--out", ev_out, "Output JSON (stdout when omitted)");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Serve the review API");
    StoreOptions serve_store;
    ServeOptions serve_opts;
    std::string serve_static;
    add_store_options(serve_cmd, serve_store);
    serve_cmd->add_option("--host", serve_opts.host, "Bind address");
    serve_cmd->add_option("--port", serve_opts.port, "Port (0 picks one)");
    serve_cmd->add_option("--static", serve_static, "Directory served at /");
    serve_cmd->add_option("--token", serve_opts.token, "Bearer token")->envname("SHOTWEAVE_TOKEN");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*plan_cmd) {
            const Taxonomy tax = plan_taxonomy.empty() ? default_taxonomy() : load_taxonomy_file(plan_taxonomy);
            const BalancePlan plan = generate_plan(plan_n, tax, plan_seed);
            if (plan_out.empty()) {
                write_plan_jsonl(plan, std::cout);
            } else {
                const fs::path path(plan_out);
                if (path.has_parent_path()) {
                    fs::create_directories(path.parent_path());
                }
                std::ofstream f(path);
                if (!f) {
                    throw Error("cannot write " + plan_out);
                }
                write_plan_jsonl(plan, f);
            }
            const json report = to_json(plan.report);
            if (!plan_report.empty()) {
                emit(report, plan_report);
            } else if (!plan_out.empty()) {
                std::cout << report.dump(2) << "\n";
            }
        } else if (*run_cmd) {
            Pipeline p(pipeline_config(run_store));
            const json doc = run_signals.find('{') != std::string::npos ? json::parse(run_signals)
                                                                          : read_json_file(run_signals);
            const ControlSignals signals = signals_from_json(doc);
            const RunRecord created =
                p.create_run(signals, run_id.empty() ? std::nullopt : std::optional<std::string>(run_id));
            RunOptions options;
            if (!run_stop.empty()) {
                options.stop_after = stage_from_string(run_stop);
            }
            const RunRecord r = p.advance(created.run_id, options);
            std::cout << run_summary(r).dump(2) << "\n";
            return r.stage == Stage::failed ? 2 : 0;
        } else if (*batch_cmd) {
            PipelineConfig cfg = pipeline_config(batch_store);
            std::ifstream in = open_input(batch_plan);
            const std::vector<ControlSignals> samples = read_plan_jsonl(in, cfg.taxonomy);
            Pipeline p(std::move(cfg));
            const BatchReport report = p.run_batch(samples, batch_parallelism);
            std::cout << to_json(report).dump(2) << "\n";
            return report.failed_count > 0 ? 2 : 0;
        } else if (*resume_cmd) {
            Pipeline p(pipeline_config(resume_store));
            const RunRecord r = p.resume(resume_id);
            std::cout << run_summary(r).dump(2) << "\n";
            return r.stage == Stage::failed ? 2 : 0;
        } else if (*status_cmd) {
            Pipeline p(pipeline_config(status_store));
            if (!status_id.empty()) {
                std::cout << run_detail(p, p.store().load(status_id)).dump(2) << "\n";
            } else {
                json runs = json::array();
                for (const auto& id : p.store().list()) {
                    runs.push_back(run_summary(p.store().load(id)));
                }
                std::cout << json{{"runs", runs}}.dump(2) << "\n";
            }
        } else if (*gate_cmd) {
            Pipeline p(pipeline_config(gate_store));
            const Stage stage = stage_from_string(gate_stage);
            RunRecord r;
            if (gate_action == "approve") {
                r = p.approve(gate_id, stage, gate_actor);
            } else if (gate_action == "reject") {
                r = p.reject(gate_id, stage, gate_edit.empty() ? json::object() : json::parse(gate_edit), gate_actor);
            } else {
                r = p.regenerate(gate_id, stage, gate_actor);
            }
            std::cout << run_summary(r).dump(2) << "\n";
        } else if (*export_cmd) {
            Pipeline p(pipeline_config(export_store));
            emit(to_json(p.export_manifest()), export_out);
        } else if (*tr_cmd) {
            const TrackSet tracks = ingest_tracks(read_json_file(tr_tracks));
            tr_params.validate();
            const TransitionPlan plan = plan_transition(tracks, tr_params);
            // The interpolated clip is assumed to have exactly T frames.
            const CutList cuts = stitch_timeline(plan, {"clip_a", tracks.clip_a_len}, {"transition", tr_params.T},
                                                 {"clip_b", tracks.clip_b_len});
            emit(json{{"cut_a", plan.cut_a},
                      {"cut_b", plan.cut_b},
                      {"params", to_json(tr_params)},
                      {"control_field", to_json(plan.field)},
                      {"cut_list", to_json(cuts)},
                      {"warnings", plan.warnings}},
                 tr_out);
        } else if (*mt_cmd) {
            MotionProfile profile = mt_profile_file.empty() ? mt_profile : motion_profile_from_json(read_json_file(mt_profile_file));
            const SynthResult r = synth_tracks(profile, mt_points, mt_seed);
            json doc = to_json(r.tracks);
            doc["truth"] = {{"stall_a", r.truth.stall_a}, {"stall_b", r.truth.stall_b}};
            doc["profile"] = to_json(profile);
            emit(doc, mt_out);
        } else if (*eval_cmd) {
            json out = json::object();
            if (!ev_ratings.empty()) {
                std::ifstream in = open_input(ev_ratings);
                out["ratings"] = ratings_table(aggregate_ratings(read_ratings_jsonl(in)));
            }
            if (!ev_binary.empty()) {
                std::ifstream in = open_input(ev_binary);
                json acc = json::object();
                for (const auto& [field, pct] : binary_accuracy(read_binary_jsonl(in))) {
                    acc[field] = round_half_up(pct);
                }
                out["binary_accuracy_pct"] = acc;
            }
            if (!ev_rankings.empty()) {
                std::ifstream in = open_input(ev_rankings);
                json wr = json::object();
                for (const auto& [method, pct] : win_rate(read_rankings_jsonl(in))) {
                    wr[method] = round_half_up(pct);
                }
                out["win_rate_pct"] = wr;
            }
            if (!ev_audits.empty()) {
                std::ifstream in = open_input(ev_audits);
                out["llm_audit"] = audit_table(summarize_llm_audit(read_audits_jsonl(in)));
            }
            if (out.empty()) {
                throw ValidationError("eval: give at least one of --ratings, --binary, --rankings, --audits");
            }
            emit(out, ev_out);
        } else if (*serve_cmd) {
            Pipeline p(pipeline_config(serve_store));
            if (!serve_static.empty()) {
                serve_opts.static_dir = serve_static;
            }
            ReviewServer server(p, serve_opts);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int port = server.start();
            std::cerr << "serving on http://" << serve_opts.host << ":" << port << "\n";
            while (!g_stop) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
            server.stop();
            server.wait_idle();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

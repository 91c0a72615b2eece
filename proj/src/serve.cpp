#include "shotweave/serve.hpp"

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>

#include "shotweave/error.hpp"
#include "shotweave/media.hpp"

namespace shotweave {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send_json(res, status, json{{"error", kind}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
    }
}

std::string actor_of(const httplib::Request& req, const json& body) {
    if (body.is_object() && body.contains("actor") && body.at("actor").is_string()) {
        return body.at("actor").get<std::string>();
    }
    return req.has_header("X-Actor") ? req.get_header_value("X-Actor") : "operator";
}

}  // namespace

json run_summary(const RunRecord& r) {
    json gates = json::object();
    for (const auto& [stage, st] : r.stages) {
        gates[std::string(to_string(stage))] = to_string(st.gate);
    }
    const auto held = r.held_at();
    return json{{"run_id", r.run_id},
                {"stage", to_string(r.stage)},
                {"failed_stage", r.failed_stage ? json(to_string(*r.failed_stage)) : json(nullptr)},
                {"failure", r.failure},
                {"held_at", held ? json(to_string(*held)) : json(nullptr)},
                {"signals", to_json(r.signals)},
                {"gates", std::move(gates)},
                {"created_at", r.created_at},
                {"updated_at", r.updated_at}};
}

json run_detail(Pipeline& pipeline, const RunRecord& r) {
    json doc = run_summary(r);
    doc["record"] = to_json(r);
    doc["screenplay"] = nullptr;
    doc["screenplay_text"] = nullptr;
    doc["keyframes"] = json::array();
    if (r.at(Stage::screenplay).complete) {
        const Screenplay sp = pipeline.load_screenplay(r);
        doc["screenplay"] = to_json(sp);
        doc["screenplay_text"] = render_screenplay_text(sp);
    }
    if (r.at(Stage::storyboard).complete) {
        const Storyboard board = pipeline.load_storyboard(r);
        for (std::size_t i = 0; i < board.keyframes.size(); ++i) {
            json k = to_json(board.keyframes[i]);
            k["index"] = i;
            doc["keyframes"].push_back(std::move(k));
        }
    }
    return doc;
}

struct ReviewServer::Impl {
    Pipeline& pipeline;
    ServeOptions options;
    httplib::Server server;
    std::thread listener;
    int port = 0;

    std::mutex tasks_mutex;
    std::condition_variable tasks_cv;
    int pending = 0;
    std::vector<std::thread> workers;

    Impl(Pipeline& p, ServeOptions o) : pipeline(p), options(std::move(o)) { install(); }

    ~Impl() {
        server.stop();
        if (listener.joinable()) {
            listener.join();
        }
        std::vector<std::thread> done;
        {
            std::lock_guard lock(tasks_mutex);
            done.swap(workers);
        }
        for (auto& w : done) {
            w.join();
        }
    }

    void spawn(std::function<void()> task) {
        std::lock_guard lock(tasks_mutex);
        ++pending;
        workers.emplace_back([this, task = std::move(task)] {
            try {
                task();
            } catch (const std::exception&) {
                // Failures are recorded on the run itself.
            }
            std::lock_guard inner(tasks_mutex);
            --pending;
            tasks_cv.notify_all();
        });
    }

    void continue_run(const std::string& run_id) {
        spawn([this, run_id] {
            try {
                pipeline.advance(run_id);
            } catch (const ConflictError&) {
                // Already executing; that call will carry on.
            }
        });
    }

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static Handler guarded(Handler inner) {
        return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                inner(req, res);
            } catch (const NotFoundError& e) {
                send_error(res, 404, "not_found", e.what());
            } catch (const ConflictError& e) {
                send_error(res, 409, "conflict", e.what());
            } catch (const ValidationError& e) {
                send_error(res, 400, "invalid", e.what());
            } catch (const PreconditionError& e) {
                send_error(res, 400, "precondition", e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "invalid", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    void install() {
        const std::string token = options.token;
        server.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
            if (token.empty() || req.path.rfind("/api/", 0) != 0) {
                return httplib::Server::HandlerResponse::Unhandled;
            }
            if (req.get_header_value("Authorization") != "Bearer " + token) {
                send_error(res, 401, "unauthorized", "missing or wrong bearer token");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });
        if (options.static_dir) {
            server.set_mount_point("/", options.static_dir->string());
        }

        const std::string id = R"(([A-Za-z0-9._-]+))";
        const std::string stage = R"(([a-z]+))";
        const std::string digest = R"(([0-9a-f]{64}))";

        server.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, json{{"status", "ok"}});
        }));

        server.Get("/api/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
            json runs = json::array();
            for (const auto& run_id : pipeline.store().list()) {
                try {
                    runs.push_back(run_summary(pipeline.store().load(run_id)));
                } catch (const ValidationError& e) {
                    runs.push_back({{"run_id", run_id}, {"stage", "corrupt"}, {"failure", e.what()}});
                }
            }
            send_json(res, 200, json{{"runs", std::move(runs)}});
        }));

        server.Post("/api/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            const ControlSignals signals = signals_from_json(body.at("signals"));
            std::optional<std::string> run_id;
            if (body.contains("run_id")) {
                run_id = body.at("run_id").get<std::string>();
            }
            const RunRecord record = pipeline.create_run(signals, run_id);
            continue_run(record.run_id);
            send_json(res, 202, run_summary(record));
        }));

        server.Get("/api/runs/" + id, guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, run_detail(pipeline, pipeline.store().load(req.matches[1])));
        }));

        server.Get("/api/runs/" + id + "/provenance",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string run_id = req.matches[1];
                       pipeline.store().load(run_id);
                       send_json(res, 200, json{{"events", pipeline.store().provenance(run_id)}});
                   }));

        server.Get("/api/runs/" + id + "/transcripts",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string run_id = req.matches[1];
                       pipeline.store().load(run_id);
                       send_json(res, 200, json{{"transcripts", pipeline.store().transcripts(run_id)}});
                   }));

        server.Get("/api/runs/" + id + "/stages/" + stage,
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const RunRecord r = pipeline.store().load(req.matches[1]);
                       const Stage s = stage_from_string(std::string(req.matches[2]));
                       send_json(res, 200, to_json(r).at("stages").at(std::string(to_string(s))));
                   }));

        server.Post("/api/runs/" + id + "/stages/" + stage + "/approve",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const json body = parse_body(req);
                        const RunRecord r = pipeline.approve(req.matches[1],
                                                             stage_from_string(std::string(req.matches[2])),
                                                             actor_of(req, body));
                        continue_run(r.run_id);
                        send_json(res, 200, run_summary(r));
                    }));

        server.Post("/api/runs/" + id + "/stages/" + stage + "/reject",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const json body = parse_body(req);
                        const RunRecord r = pipeline.reject(
                            req.matches[1], stage_from_string(std::string(req.matches[2])), body, actor_of(req, body));
                        send_json(res, 200, run_detail(pipeline, r));
                    }));

        server.Post("/api/runs/" + id + "/stages/" + stage + "/regenerate",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const json body = parse_body(req);
                        const RunRecord r = pipeline.regenerate(
                            req.matches[1], stage_from_string(std::string(req.matches[2])), actor_of(req, body));
                        send_json(res, 200, run_detail(pipeline, r));
                    }));

        server.Post("/api/runs/" + id + "/resume", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const RunRecord r = pipeline.store().load(req.matches[1]);
            continue_run(r.run_id);
            send_json(res, 202, run_summary(r));
        }));

        server.Get("/api/artifacts/" + digest, guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string d = req.matches[1];
            const json meta = pipeline.store().artifacts().sidecar(d);
            res.status = 200;
            res.set_content(pipeline.store().artifacts().read(d), meta.value("media_type", "application/octet-stream"));
        }));

        server.Get("/api/artifacts/" + digest + "/meta",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, pipeline.store().artifacts().sidecar(req.matches[1]));
                   }));

        server.Get("/api/artifacts/" + digest + "/preview.bmp",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string d = req.matches[1];
                       const std::string media = pipeline.store().artifacts().sidecar(d).value("media_type", "");
                       const std::string bytes = pipeline.store().artifacts().read(d);
                       Image image;
                       if (media == kMediaImage) {
                           image = decode_ppm(bytes);
                       } else if (media == kMediaClip) {
                           const Clip clip = decode_clip(bytes);
                           const std::size_t f =
                               req.has_param("frame") ? std::stoul(req.get_param_value("frame")) : 0;
                           if (f >= clip.size()) {
                               throw ValidationError("frame " + std::to_string(f) + " outside the clip");
                           }
                           image = clip[f];
                       } else {
                           throw ValidationError("artifact " + d + " is not an image or clip");
                       }
                       res.status = 200;
                       res.set_content(encode_bmp(image), "image/bmp");
                   }));

        server.Get("/api/manifest", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, to_json(pipeline.export_manifest()));
        }));
    }
};

ReviewServer::ReviewServer(Pipeline& pipeline, ServeOptions options)
    : impl_(std::make_unique<Impl>(pipeline, std::move(options))) {}

ReviewServer::~ReviewServer() = default;

int ReviewServer::start() {
    Impl& s = *impl_;
    s.port = s.options.port == 0 ? s.server.bind_to_any_port(s.options.host)
                                 : (s.server.bind_to_port(s.options.host, s.options.port) ? s.options.port : -1);
    if (s.port <= 0) {
        throw Error("cannot bind " + s.options.host + ":" + std::to_string(s.options.port));
    }
    s.listener = std::thread([&s] { s.server.listen_after_bind(); });
    s.server.wait_until_ready();
    return s.port;
}

void ReviewServer::run() {
    Impl& s = *impl_;
    if (!s.server.listen(s.options.host, s.options.port)) {
        throw Error("cannot listen on " + s.options.host + ":" + std::to_string(s.options.port));
    }
}

void ReviewServer::stop() { impl_->server.stop(); }

void ReviewServer::wait_idle() {
    std::unique_lock lock(impl_->tasks_mutex);
    impl_->tasks_cv.wait(lock, [this] { return impl_->pending == 0; });
}

}  // namespace shotweave

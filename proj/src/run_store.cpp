#include "shotweave/run_store.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "shotweave/error.hpp"

namespace shotweave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::planned, "planned"}, {Stage::screenplay, "screenplay"},   {Stage::storyboard, "storyboard"},
    {Stage::clips, "clips"},     {Stage::transitions, "transitions"}, {Stage::final, "final"},
    {Stage::failed, "failed"}};

constexpr std::pair<GateState, std::string_view> kGateNames[] = {{GateState::automatic, "auto"},
                                                                  {GateState::awaiting_approval, "awaiting_approval"},
                                                                  {GateState::approved, "approved"},
                                                                  {GateState::rejected, "rejected"}};

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> out;
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error&) {
            // A torn final line from a crash mid-append is skipped.
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Stage stage) {
    for (const auto& [s, name] : kStageNames) {
        if (s == stage) {
            return name;
        }
    }
    return "unknown";
}

Stage stage_from_string(std::string_view name) {
    for (const auto& [s, n] : kStageNames) {
        if (n == name) {
            return s;
        }
    }
    throw ValidationError("unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(GateState gate) {
    for (const auto& [g, name] : kGateNames) {
        if (g == gate) {
            return name;
        }
    }
    return "unknown";
}

GateState gate_from_string(std::string_view name) {
    for (const auto& [g, n] : kGateNames) {
        if (n == name) {
            return g;
        }
    }
    throw ValidationError("unknown gate state '" + std::string(name) + "'");
}

StageRecord& RunRecord::at(Stage s) {
    const auto it = stages.find(s);
    if (it == stages.end()) {
        throw PreconditionError("no work stage '" + std::string(to_string(s)) + "'");
    }
    return it->second;
}

const StageRecord& RunRecord::at(Stage s) const {
    const auto it = stages.find(s);
    if (it == stages.end()) {
        throw PreconditionError("no work stage '" + std::string(to_string(s)) + "'");
    }
    return it->second;
}

Stage RunRecord::last_completed() const {
    Stage last = Stage::planned;
    for (Stage s : kWorkStages) {
        if (!at(s).complete) {
            break;
        }
        last = s;
    }
    return last;
}

std::optional<Stage> RunRecord::next_stage() const {
    for (Stage s : kWorkStages) {
        if (!at(s).complete) {
            return s;
        }
    }
    return std::nullopt;
}

std::optional<Stage> RunRecord::held_at() const {
    const Stage last = last_completed();
    if (last == Stage::planned) {
        return std::nullopt;
    }
    const GateState g = at(last).gate;
    if (g == GateState::awaiting_approval || g == GateState::rejected) {
        return last;
    }
    return std::nullopt;
}

json to_json(const RunRecord& r) {
    json stages = json::object();
    for (const auto& [s, rec] : r.stages) {
        stages[std::string(to_string(s))] = {{"complete", rec.complete},
                                             {"gate", to_string(rec.gate)},
                                             {"attempt", rec.attempt},
                                             {"artifacts", rec.artifacts},
                                             {"started_at", rec.started_at},
                                             {"completed_at", rec.completed_at}};
    }
    json doc{{"run_id", r.run_id},
             {"signals", to_json(r.signals)},
             {"seed", r.seed},
             {"stage", to_string(r.stage)},
             {"failure", r.failure},
             {"stages", std::move(stages)},
             {"created_at", r.created_at},
             {"updated_at", r.updated_at}};
    doc["failed_stage"] = r.failed_stage ? json(to_string(*r.failed_stage)) : json(nullptr);
    return doc;
}

RunRecord run_record_from_json(const json& doc) {
    try {
        RunRecord r;
        r.run_id = doc.at("run_id").get<std::string>();
        r.signals = signals_from_json(doc.at("signals"));
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.stage = stage_from_string(doc.at("stage").get<std::string>());
        r.failure = doc.value("failure", "");
        if (doc.contains("failed_stage") && !doc.at("failed_stage").is_null()) {
            r.failed_stage = stage_from_string(doc.at("failed_stage").get<std::string>());
        }
        for (Stage s : kWorkStages) {
            const json& st = doc.at("stages").at(std::string(to_string(s)));
            StageRecord rec;
            rec.complete = st.at("complete").get<bool>();
            rec.gate = gate_from_string(st.at("gate").get<std::string>());
            rec.attempt = st.value("attempt", 0);
            rec.artifacts = st.value("artifacts", json::object());
            rec.started_at = st.value("started_at", "");
            rec.completed_at = st.value("completed_at", "");
            r.stages.emplace(s, std::move(rec));
        }
        r.created_at = doc.value("created_at", "");
        r.updated_at = doc.value("updated_at", "");
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("corrupt checkpoint: ") + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("corrupt checkpoint: ") + e.what());
    }
}

RunRecord make_run_record(std::string run_id, ControlSignals signals, std::uint64_t seed) {
    RunRecord r;
    r.run_id = std::move(run_id);
    r.signals = std::move(signals);
    r.seed = seed;
    for (Stage s : kWorkStages) {
        r.stages.emplace(s, StageRecord{});
    }
    r.created_at = utc_now();
    r.updated_at = r.created_at;
    return r;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    const std::size_t n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::snprintf(buf + n, sizeof buf - n, ".%03dZ", static_cast<int>(ms));
    return buf;
}

void atomic_write(const fs::path& path, std::string_view bytes) {
    static std::atomic<std::uint64_t> counter{0};
    std::ostringstream name;
    name << path.filename().string() << ".tmp." << ::getpid() << "." << counter.fetch_add(1);
    const fs::path tmp = path.parent_path() / name.str();
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

bool valid_run_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id.front() == '.') {
        return false;
    }
    return std::ranges::all_of(id, [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
               c == '-';
    });
}

RunStore::RunStore(fs::path root) : root_(std::move(root)), artifacts_(root_) {
    fs::create_directories(root_ / "runs");
}

fs::path RunStore::run_dir(const std::string& run_id) const {
    if (!valid_run_id(run_id)) {
        throw ValidationError("invalid run id '" + run_id + "'");
    }
    return root_ / "runs" / run_id;
}

bool RunStore::exists(const std::string& run_id) const {
    return valid_run_id(run_id) && fs::exists(run_dir(run_id) / "record.json");
}

RunRecord RunStore::load(const std::string& run_id) const {
    const fs::path file = run_dir(run_id) / "record.json";
    if (!fs::exists(file)) {
        throw NotFoundError("no run '" + run_id + "'");
    }
    std::ifstream in(file);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("corrupt checkpoint for " + run_id + ": " + e.what());
    }
    return run_record_from_json(doc);
}

void RunStore::save(RunRecord& record) {
    const fs::path dir = run_dir(record.run_id);
    fs::create_directories(dir);
    record.updated_at = utc_now();
    atomic_write(dir / "record.json", to_json(record).dump(2) + "\n");
}

std::vector<std::string> RunStore::list() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
        if (entry.is_directory() && fs::exists(entry.path() / "record.json")) {
            out.push_back(entry.path().filename().string());
        }
    }
    std::ranges::sort(out);
    return out;
}

void RunStore::append_line(const fs::path& path, const std::string& line) {
    std::lock_guard lock(append_mutex_);
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << line << '\n';
    out.flush();
    if (!out) {
        throw Error("cannot append to " + path.string());
    }
}

void RunStore::append_provenance(const std::string& run_id, json event) {
    if (!event.contains("at")) {
        event["at"] = utc_now();
    }
    append_line(run_dir(run_id) / "provenance.jsonl", event.dump());
}

std::vector<json> RunStore::provenance(const std::string& run_id) const {
    return read_jsonl(run_dir(run_id) / "provenance.jsonl");
}

void RunStore::append_transcripts(const std::string& run_id, const std::vector<Transcript>& transcripts) {
    for (const auto& t : transcripts) {
        append_line(run_dir(run_id) / "transcripts.jsonl", to_json(t).dump());
    }
}

std::vector<json> RunStore::transcripts(const std::string& run_id) const {
    return read_jsonl(run_dir(run_id) / "transcripts.jsonl");
}

std::mutex& RunStore::lock_for(const std::string& run_id) {
    std::lock_guard lock(locks_mutex_);
    auto& slot = locks_[run_id];
    if (!slot) {
        slot = std::make_unique<std::mutex>();
    }
    return *slot;
}

}  // namespace shotweave

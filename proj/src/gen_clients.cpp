#include "shotweave/gen_clients.hpp"

#include <chrono>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "shotweave/hashing.hpp"
#include "shotweave/mock_transport.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_sibling(const fs::path& target) {
    static std::atomic<std::uint64_t> counter{0};
    std::ostringstream name;
    name << target.filename().string() << ".tmp." << ::getpid() << "." << std::this_thread::get_id() << "."
         << counter.fetch_add(1);
    return target.parent_path() / name.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw Error("cannot write " + path.string());
    }
}

// Publishes `bytes` at `target` unless something is already there.
// Returns true if this call created the file.
bool publish_once(const fs::path& target, std::string_view bytes) {
    if (fs::exists(target)) {
        return false;
    }
    const fs::path tmp = temp_sibling(target);
    write_file(tmp, bytes);
    std::error_code ec;
    fs::create_hard_link(tmp, target, ec);
    fs::remove(tmp);
    if (ec) {
        if (fs::exists(target)) {
            return false;
        }
        throw Error("cannot publish " + target.string() + ": " + ec.message());
    }
    return true;
}

}  // namespace

std::string_view to_string(GenKind kind) {
    switch (kind) {
        case GenKind::llm: return "llm";
        case GenKind::t2i: return "t2i";
        case GenKind::i2i: return "i2i";
        case GenKind::flf2v: return "flf2v";
        case GenKind::guided_interp: return "guided_interp";
    }
    return "unknown";
}

GenKind gen_kind_from_string(std::string_view name) {
    for (GenKind k : {GenKind::llm, GenKind::t2i, GenKind::i2i, GenKind::flf2v, GenKind::guided_interp}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ValidationError("unknown generation kind '" + std::string(name) + "'");
}

void EndpointRegistry::add(ModelEndpoint endpoint) {
    if (endpoint.model_id.empty()) {
        throw ValidationError("endpoint: empty model_id");
    }
    if (!(endpoint.timeout_s > 0)) {
        throw ValidationError("endpoint " + endpoint.model_id + ": timeout must be positive");
    }
    if (endpoint.rate_limit_rpm < 0) {
        throw ValidationError("endpoint " + endpoint.model_id + ": negative rate limit");
    }
    if (endpoints_.contains(endpoint.model_id)) {
        throw ValidationError("endpoint: duplicate model_id '" + endpoint.model_id + "'");
    }
    endpoints_.emplace(endpoint.model_id, std::move(endpoint));
}

const ModelEndpoint& EndpointRegistry::at(const std::string& model_id) const {
    const auto it = endpoints_.find(model_id);
    if (it == endpoints_.end()) {
        throw NotFoundError("endpoint '" + model_id + "' is not registered");
    }
    return it->second;
}

std::vector<std::string> EndpointRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : endpoints_) {
        out.push_back(id);
    }
    return out;
}

EndpointRegistry EndpointRegistry::from_json(const json& doc) {
    EndpointRegistry reg;
    try {
        for (const auto& item : doc) {
            ModelEndpoint ep;
            ep.model_id = item.at("model_id").get<std::string>();
            ep.base_url = item.at("base_url").get<std::string>();
            ep.auth_ref = item.value("auth_ref", "");
            ep.rate_limit_rpm = item.value("rate_limit", 0.0);
            ep.timeout_s = item.value("timeout", 60.0);
            ep.options = item.value("options", json::object());
            reg.add(std::move(ep));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("endpoint registry: ") + e.what());
    }
    return reg;
}

json to_json(const ArtifactRef& ref) { return json{{"digest", ref.digest}, {"media_type", ref.media_type}}; }

ArtifactRef artifact_ref_from_json(const json& doc) {
    return ArtifactRef{doc.at("digest").get<std::string>(), doc.at("media_type").get<std::string>()};
}

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "artifacts");
    fs::create_directories(root_ / "cache");
}

fs::path ArtifactStore::path_of(const std::string& digest) const {
    if (digest.size() < 8 || digest.find_first_not_of("0123456789abcdef") != std::string::npos) {
        throw ValidationError("artifact store: malformed digest '" + digest + "'");
    }
    return root_ / "artifacts" / digest.substr(0, 2) / digest;
}

ArtifactRef ArtifactStore::put(std::string_view bytes, std::string_view media_type, json provenance) {
    ArtifactRef ref{sha256_hex(bytes), std::string(media_type)};
    const fs::path path = path_of(ref.digest);
    fs::create_directories(path.parent_path());
    publish_once(path, bytes);
    provenance["digest"] = ref.digest;
    provenance["media_type"] = ref.media_type;
    provenance["size"] = bytes.size();
    if (!provenance.contains("timestamp")) {
        provenance["timestamp"] = now_iso8601();
    }
    fs::path sidecar_path = path;
    sidecar_path += ".json";
    publish_once(sidecar_path, provenance.dump(2));
    return ref;
}

std::string ArtifactStore::read(const std::string& digest) const { return read_file(path_of(digest)); }

bool ArtifactStore::contains(const std::string& digest) const { return fs::exists(path_of(digest)); }

json ArtifactStore::sidecar(const std::string& digest) const {
    fs::path p = path_of(digest);
    p += ".json";
    return json::parse(read_file(p));
}

std::optional<ArtifactRef> ArtifactStore::cache_lookup(const std::string& key) const {
    const fs::path p = root_ / "cache" / key.substr(0, 2) / key;
    if (!fs::exists(p)) {
        return std::nullopt;
    }
    ArtifactRef ref = artifact_ref_from_json(json::parse(read_file(p)));
    if (!contains(ref.digest)) {
        return std::nullopt;
    }
    return ref;
}

ArtifactRef ArtifactStore::cache_insert(const std::string& key, const ArtifactRef& ref) {
    const fs::path p = root_ / "cache" / key.substr(0, 2) / key;
    fs::create_directories(p.parent_path());
    if (publish_once(p, to_json(ref).dump())) {
        return ref;
    }
    return artifact_ref_from_json(json::parse(read_file(p)));
}

void ArtifactStore::log_wire(const json& entry) {
    std::lock_guard lock(wire_mutex_);
    std::ofstream out(root_ / "wire.jsonl", std::ios::app);
    out << entry.dump() << '\n';
}

std::string cache_key(std::string_view model_id, const GenRequest& request) {
    const json material{{"model_id", model_id},
                        {"kind", to_string(request.kind)},
                        {"payload", request.payload},
                        {"seed", request.seed}};
    return sha256_hex(canonical_json(material));
}

TokenBucket::TokenBucket(double per_minute)
    : capacity_(std::max(1.0, per_minute / 60.0)),
      tokens_(capacity_),
      per_second_(per_minute / 60.0),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * per_second_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait = (1.0 - tokens_) / per_second_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        lock.lock();
    }
}

GenService::GenService(ArtifactStore& store, EndpointRegistry registry, RetryPolicy retry)
    : store_(store),
      registry_(std::move(registry)),
      retry_(retry),
      mock_(std::make_shared<MockTransport>()),
      http_(std::make_shared<HttpTransport>()) {
    if (retry_.max_attempts < 1) {
        throw ValidationError("retry policy: max_attempts must be >= 1");
    }
}

GenService::~GenService() = default;

void GenService::set_transport(const std::string& model_id, std::shared_ptr<Transport> transport) {
    std::lock_guard lock(mutex_);
    overrides_[model_id] = std::move(transport);
}

Transport& GenService::transport_for(const ModelEndpoint& endpoint) {
    {
        std::lock_guard lock(mutex_);
        if (const auto it = overrides_.find(endpoint.model_id); it != overrides_.end()) {
            return *it->second;
        }
    }
    if (endpoint.base_url.rfind("mock://", 0) == 0) {
        return *mock_;
    }
    if (endpoint.base_url.rfind("http://", 0) == 0 || endpoint.base_url.rfind("https://", 0) == 0) {
        return *http_;
    }
    throw ValidationError("endpoint " + endpoint.model_id + ": unsupported URL scheme in '" + endpoint.base_url + "'");
}

TokenBucket* GenService::bucket_for(const ModelEndpoint& endpoint) {
    if (endpoint.rate_limit_rpm <= 0) {
        return nullptr;
    }
    std::lock_guard lock(mutex_);
    auto& slot = buckets_[endpoint.model_id];
    if (!slot) {
        slot = std::make_unique<TokenBucket>(endpoint.rate_limit_rpm);
    }
    return slot.get();
}

void GenService::validate_payload(const GenRequest& request) const {
    const json& p = request.payload;
    if (!p.is_object()) {
        throw ValidationError("payload must be an object");
    }
    auto require_string = [&](const char* key) {
        if (!p.contains(key) || !p.at(key).is_string() || p.at(key).get<std::string>().empty()) {
            throw ValidationError(std::string("payload for ") + std::string(to_string(request.kind)) +
                                  " requires non-empty '" + key + "'");
        }
    };
    auto require_artifact = [&](const char* key) {
        require_string(key);
        if (!store_.contains(p.at(key).get<std::string>())) {
            throw ValidationError(std::string("payload references missing artifact '") + key + "'");
        }
    };
    switch (request.kind) {
        case GenKind::llm:
            require_string("role");
            require_string("prompt");
            break;
        case GenKind::t2i: require_string("prompt"); break;
        case GenKind::i2i:
            require_string("prompt");
            require_artifact("source");
            break;
        case GenKind::flf2v:
            require_artifact("first");
            require_artifact("last");
            if (!p.contains("num_frames") || !p.at("num_frames").is_number_integer() ||
                p.at("num_frames").get<int>() < 2) {
                throw ValidationError("payload for flf2v requires num_frames >= 2");
            }
            break;
        case GenKind::guided_interp:
            require_artifact("first");
            require_artifact("last");
            require_artifact("control_field");
            break;
    }
}

GenResponse GenService::execute(const std::string& model_id, const GenRequest& request) {
    const ModelEndpoint& endpoint = registry_.at(model_id);
    validate_payload(request);
    const std::string key = cache_key(model_id, request);

    if (auto hit = store_.cache_lookup(key)) {
        GenResponse resp;
        resp.artifact = *hit;
        resp.cache_hit = true;
        resp.metadata = {{"cache_key", key}};
        return resp;
    }

    Transport& transport = transport_for(endpoint);
    TokenBucket* bucket = bucket_for(endpoint);
    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        if (bucket) {
            bucket->acquire();
        }
        {
            std::lock_guard lock(mutex_);
            ++calls_[model_id];
        }
        store_.log_wire({{"model_id", model_id},
                         {"kind", to_string(request.kind)},
                         {"attempt", attempt},
                         {"seed", request.seed},
                         {"payload", request.payload}});
        const auto start = std::chrono::steady_clock::now();
        try {
            TransportReply reply = transport.send(endpoint, request, store_);
            const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            json provenance{{"model_id", model_id},
                            {"kind", to_string(request.kind)},
                            {"payload_hash", sha256_hex(canonical_json(request.payload))},
                            {"payload", request.payload},
                            {"seed", request.seed},
                            {"cache_key", key},
                            {"latency_s", latency},
                            {"response_metadata", reply.metadata}};
            ArtifactRef ref = store_.put(reply.bytes, reply.media_type, std::move(provenance));
            GenResponse resp;
            resp.artifact = store_.cache_insert(key, ref);
            resp.latency_s = latency;
            resp.metadata = reply.metadata;
            resp.metadata["cache_key"] = key;
            resp.metadata["attempts"] = attempt;
            return resp;
        } catch (const TransportError& e) {
            last_error = e.what();
            if (!e.retryable() || attempt == retry_.max_attempts) {
                throw ClientError(model_id + ": " + last_error + " (after " + std::to_string(attempt) + " attempts)",
                                  attempt);
            }
        }
        std::chrono::milliseconds delay = retry_.base_delay * (std::int64_t{1} << (attempt - 1));
        delay = std::min(delay, retry_.max_delay);
        if (delay.count() > 0) {
            const std::uint64_t r = mix64(jitter_state_.fetch_add(1));
            const double unit = static_cast<double>(r >> 11) * 0x1.0p-53;
            const double factor = 1.0 + retry_.jitter * (2.0 * unit - 1.0);
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay.count() * factor));
        }
    }
    throw ClientError(model_id + ": " + last_error, retry_.max_attempts);
}

std::size_t GenService::network_calls(const std::string& model_id) const {
    std::lock_guard lock(mutex_);
    const auto it = calls_.find(model_id);
    return it == calls_.end() ? 0 : it->second;
}

std::size_t GenService::network_calls() const {
    std::lock_guard lock(mutex_);
    std::size_t total = 0;
    for (const auto& [_, n] : calls_) {
        total += n;
    }
    return total;
}

ServiceClient::ServiceClient(GenService& service, std::string model_id, json options)
    : service_(service), model_id_(std::move(model_id)), options_(std::move(options)) {
    (void)service_.registry().at(model_id_);
}

std::string ServiceClient::complete(const LlmPrompt& prompt, std::uint64_t seed) {
    GenRequest req{GenKind::llm,
                   {{"role", prompt.role},
                    {"prompt", prompt.text},
                    {"schema_hint", prompt.schema_hint},
                    {"context", prompt.context}},
                   seed};
    return service_.store().read(service_.execute(model_id_, req).artifact);
}

ArtifactRef ServiceClient::generate(const std::string& prompt, std::uint64_t seed) {
    GenRequest req{GenKind::t2i, {{"prompt", prompt}, {"options", options_}}, seed};
    return service_.execute(model_id_, req).artifact;
}

ArtifactRef ServiceClient::edit(const ArtifactRef& source, const std::string& prompt, std::uint64_t seed) {
    GenRequest req{GenKind::i2i, {{"source", source.digest}, {"prompt", prompt}, {"options", options_}}, seed};
    return service_.execute(model_id_, req).artifact;
}

ArtifactRef ServiceClient::first_last_to_video(const ArtifactRef& first, const ArtifactRef& last, const json& triplet,
                                               int num_frames, std::uint64_t seed) {
    GenRequest req{GenKind::flf2v,
                   {{"first", first.digest},
                    {"last", last.digest},
                    {"prompt", triplet},
                    {"num_frames", num_frames},
                    {"options", options_}},
                   seed};
    return service_.execute(model_id_, req).artifact;
}

ArtifactRef ServiceClient::interpolate(const ArtifactRef& first, const ArtifactRef& last,
                                       const ArtifactRef& control_field, std::uint64_t seed) {
    GenRequest req{GenKind::guided_interp,
                   {{"first", first.digest},
                    {"last", last.digest},
                    {"control_field", control_field.digest},
                    {"options", options_}},
                   seed};
    return service_.execute(model_id_, req).artifact;
}

std::string llm_complete(GenService& service, const std::string& model_id, const LlmPrompt& prompt,
                         std::uint64_t seed) {
    return ServiceClient(service, model_id).complete(prompt, seed);
}

ArtifactRef image_generate(GenService& service, const std::string& model_id, const std::string& prompt,
                           std::uint64_t seed) {
    return ServiceClient(service, model_id).generate(prompt, seed);
}

ArtifactRef image_edit(GenService& service, const std::string& model_id, const ArtifactRef& source,
                       const std::string& prompt, std::uint64_t seed) {
    return ServiceClient(service, model_id).edit(source, prompt, seed);
}

ArtifactRef video_flf2v(GenService& service, const std::string& model_id, const ArtifactRef& first,
                        const ArtifactRef& last, const json& triplet, int num_frames, std::uint64_t seed) {
    return ServiceClient(service, model_id).first_last_to_video(first, last, triplet, num_frames, seed);
}

ArtifactRef guided_interpolate(GenService& service, const std::string& model_id, const ArtifactRef& first,
                               const ArtifactRef& last, const ArtifactRef& control_field, std::uint64_t seed) {
    return ServiceClient(service, model_id).interpolate(first, last, control_field, seed);
}

}  // namespace shotweave

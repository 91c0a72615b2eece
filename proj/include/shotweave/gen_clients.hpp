#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shotweave/error.hpp"

namespace shotweave {

enum class GenKind { llm, t2i, i2i, flf2v, guided_interp };

std::string_view to_string(GenKind kind);
GenKind gen_kind_from_string(std::string_view name);

struct ModelEndpoint {
    std::string model_id;
    std::string base_url;      // "mock://..." selects the in-process mock
    std::string auth_ref;      // name of an environment variable holding the secret
    double rate_limit_rpm = 0;  // 0 = unlimited
    double timeout_s = 60;
    nlohmann::json options = nlohmann::json::object();
};

class EndpointRegistry {
public:
    void add(ModelEndpoint endpoint);
    const ModelEndpoint& at(const std::string& model_id) const;
    bool contains(const std::string& model_id) const { return endpoints_.contains(model_id); }
    std::vector<std::string> ids() const;

    // [{model_id, base_url, auth_ref?, rate_limit?, timeout?, options?}, ...]
    static EndpointRegistry from_json(const nlohmann::json& doc);

private:
    std::map<std::string, ModelEndpoint> endpoints_;
};

struct ArtifactRef {
    std::string digest;      // sha256 of the bytes
    std::string media_type;  // e.g. image/x-portable-pixmap

    friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

nlohmann::json to_json(const ArtifactRef& ref);
ArtifactRef artifact_ref_from_json(const nlohmann::json& doc);

inline constexpr std::string_view kMediaImage = "image/x-portable-pixmap";
inline constexpr std::string_view kMediaClip = "video/x-ppm-stream";
inline constexpr std::string_view kMediaText = "text/plain";
inline constexpr std::string_view kMediaJson = "application/json";

// Content-addressed directory:
//   <root>/artifacts/<d[0:2]>/<digest>       bytes
//   <root>/artifacts/<d[0:2]>/<digest>.json  provenance sidecar
//   <root>/cache/<key[0:2]>/<key>            cache entry -> artifact ref
//   <root>/wire.jsonl                        every outbound payload
// Writes are atomic; the first writer of a digest or cache key wins and
// later writers read back the stored value.
class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    // `provenance` is recorded in the sidecar together with the digest,
    // size and a timestamp.
    ArtifactRef put(std::string_view bytes, std::string_view media_type, nlohmann::json provenance);
    std::string read(const ArtifactRef& ref) const { return read(ref.digest); }
    std::string read(const std::string& digest) const;
    bool contains(const std::string& digest) const;
    std::filesystem::path path_of(const std::string& digest) const;
    nlohmann::json sidecar(const std::string& digest) const;

    std::optional<ArtifactRef> cache_lookup(const std::string& key) const;
    ArtifactRef cache_insert(const std::string& key, const ArtifactRef& ref);

    void log_wire(const nlohmann::json& entry);

private:
    std::filesystem::path root_;
    std::mutex wire_mutex_;
};

struct GenRequest {
    GenKind kind = GenKind::llm;
    nlohmann::json payload = nlohmann::json::object();
    std::uint64_t seed = 0;
};

// Stable hash of (model_id, kind, canonical payload, seed).
std::string cache_key(std::string_view model_id, const GenRequest& request);

struct GenResponse {
    ArtifactRef artifact;
    double latency_s = 0;
    nlohmann::json metadata = nlohmann::json::object();
    bool cache_hit = false;
};

struct TransportReply {
    std::string bytes;
    std::string media_type;
    nlohmann::json metadata = nlohmann::json::object();
};

class TransportError : public Error {
public:
    TransportError(const std::string& what, bool retryable, int status = 0)
        : Error(what), retryable_(retryable), status_(status) {}
    bool retryable() const noexcept { return retryable_; }
    int status() const noexcept { return status_; }

private:
    bool retryable_;
    int status_;
};

// One network hop. Implementations must be safe for concurrent send().
class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportReply send(const ModelEndpoint& endpoint, const GenRequest& request,
                                const ArtifactStore& store) = 0;
};

// Plain JSON-over-HTTP adapter: POST <base_url>/<kind> with the canonical
// payload (input artifacts inlined as base64). Vendor-specific wire schemas
// sit behind their own Transport implementations.
class HttpTransport final : public Transport {
public:
    TransportReply send(const ModelEndpoint& endpoint, const GenRequest& request,
                        const ArtifactStore& store) override;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{200};
    std::chrono::milliseconds max_delay{5000};
    double jitter = 0.25;  // fraction of the delay, uniformly +/-
};

class TokenBucket {
public:
    explicit TokenBucket(double per_minute);
    void acquire();

private:
    std::mutex mutex_;
    double capacity_;
    double tokens_;
    double per_second_;
    std::chrono::steady_clock::time_point last_;
};

class MockTransport;

class GenService {
public:
    GenService(ArtifactStore& store, EndpointRegistry registry, RetryPolicy retry = {});
    ~GenService();

    GenService(const GenService&) = delete;
    GenService& operator=(const GenService&) = delete;

    // Overrides the transport chosen from the endpoint URL scheme.
    void set_transport(const std::string& model_id, std::shared_ptr<Transport> transport);
    MockTransport& mock() { return *mock_; }

    // Cache lookup, then rate-limited send with exponential backoff.
    GenResponse execute(const std::string& model_id, const GenRequest& request);

    std::size_t network_calls(const std::string& model_id) const;
    std::size_t network_calls() const;

    ArtifactStore& store() { return store_; }
    const EndpointRegistry& registry() const { return registry_; }

private:
    Transport& transport_for(const ModelEndpoint& endpoint);
    TokenBucket* bucket_for(const ModelEndpoint& endpoint);
    void validate_payload(const GenRequest& request) const;

    ArtifactStore& store_;
    EndpointRegistry registry_;
    RetryPolicy retry_;
    std::shared_ptr<MockTransport> mock_;
    std::shared_ptr<HttpTransport> http_;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Transport>> overrides_;
    std::map<std::string, std::unique_ptr<TokenBucket>> buckets_;
    std::map<std::string, std::size_t> calls_;
    std::atomic<std::uint64_t> jitter_state_{0x5eed};
};

// Model-facing client roles. Pipeline stages depend only on these.
struct LlmPrompt {
    std::string role;         // storyteller | cinematographer | judge
    std::string text;         // rendered prompt
    std::string schema_hint;  // expected reply format
    nlohmann::json context = nlohmann::json::object();  // structured inputs behind the prompt
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const LlmPrompt& prompt, std::uint64_t seed) = 0;
    virtual std::string model_id() const = 0;
};

class ImageGenClient {
public:
    virtual ~ImageGenClient() = default;
    virtual ArtifactRef generate(const std::string& prompt, std::uint64_t seed) = 0;
    virtual std::string model_id() const = 0;
};

class ImageEditClient {
public:
    virtual ~ImageEditClient() = default;
    virtual ArtifactRef edit(const ArtifactRef& source, const std::string& prompt, std::uint64_t seed) = 0;
    virtual std::string model_id() const = 0;
};

class VideoClient {
public:
    virtual ~VideoClient() = default;
    // `triplet` is {shot_init, movement, shot_end}.
    virtual ArtifactRef first_last_to_video(const ArtifactRef& first, const ArtifactRef& last,
                                            const nlohmann::json& triplet, int num_frames,
                                            std::uint64_t seed) = 0;
    virtual std::string model_id() const = 0;
};

class InterpolatorClient {
public:
    virtual ~InterpolatorClient() = default;
    virtual ArtifactRef interpolate(const ArtifactRef& first, const ArtifactRef& last,
                                    const ArtifactRef& control_field, std::uint64_t seed) = 0;
    virtual std::string model_id() const = 0;
};

// Binds one registered endpoint to every client role. `options` is merged
// into each payload (output size and similar generation settings).
class ServiceClient final : public LlmClient,
                            public ImageGenClient,
                            public ImageEditClient,
                            public VideoClient,
                            public InterpolatorClient {
public:
    ServiceClient(GenService& service, std::string model_id,
                  nlohmann::json options = nlohmann::json::object());

    std::string complete(const LlmPrompt& prompt, std::uint64_t seed) override;
    ArtifactRef generate(const std::string& prompt, std::uint64_t seed) override;
    ArtifactRef edit(const ArtifactRef& source, const std::string& prompt, std::uint64_t seed) override;
    ArtifactRef first_last_to_video(const ArtifactRef& first, const ArtifactRef& last, const nlohmann::json& triplet,
                                    int num_frames, std::uint64_t seed) override;
    ArtifactRef interpolate(const ArtifactRef& first, const ArtifactRef& last, const ArtifactRef& control_field,
                            std::uint64_t seed) override;
    std::string model_id() const override { return model_id_; }

private:
    GenService& service_;
    std::string model_id_;
    nlohmann::json options_;
};

// Free-function forms of the five generation operations.
std::string llm_complete(GenService& service, const std::string& model_id, const LlmPrompt& prompt,
                         std::uint64_t seed);
ArtifactRef image_generate(GenService& service, const std::string& model_id, const std::string& prompt,
                           std::uint64_t seed);
ArtifactRef image_edit(GenService& service, const std::string& model_id, const ArtifactRef& source,
                       const std::string& prompt, std::uint64_t seed);
ArtifactRef video_flf2v(GenService& service, const std::string& model_id, const ArtifactRef& first,
                        const ArtifactRef& last, const nlohmann::json& triplet, int num_frames, std::uint64_t seed);
ArtifactRef guided_interpolate(GenService& service, const std::string& model_id, const ArtifactRef& first,
                               const ArtifactRef& last, const ArtifactRef& control_field, std::uint64_t seed);

}  // namespace shotweave

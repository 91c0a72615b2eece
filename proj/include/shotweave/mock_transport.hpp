#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>

#include <json.hpp>

#include "shotweave/gen_clients.hpp"

namespace shotweave {

struct FailureInjection {
    int fail_first = 0;     // fail this many attempts, then succeed
    bool fail_all = false;  // fail every attempt
    bool retryable = true;
    int status = 503;
};

// Deterministic offline stand-in for every generation kind. Replies are
// pure functions of (payload, seed, endpoint options):
//   llm            role-specific key/value or prose templates
//   t2i            procedural colour fields + fiducials from the payload hash
//   i2i            source image blended with a hash-derived overlay
//   flf2v          linear cross-fade from first to last image
//   guided_interp  cross-fade with the control-field trajectories drawn in
// Endpoint options understood: width, height (default 256x144),
// judge_error_rate, fixed_reply (llm replies verbatim).
class MockTransport final : public Transport {
public:
    TransportReply send(const ModelEndpoint& endpoint, const GenRequest& request,
                        const ArtifactStore& store) override;

    void inject_failure(const std::string& model_id, FailureInjection failure);
    void clear_failures();
    std::size_t attempts(const std::string& model_id) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, FailureInjection> failures_;
    std::map<std::string, std::size_t> attempts_;
};

// Role templates, exposed for tests.
std::string mock_storyteller_reply(const nlohmann::json& context, std::uint64_t seed);
std::string mock_cinematographer_reply(const nlohmann::json& context, std::uint64_t seed);
std::string mock_judge_reply(const nlohmann::json& context, std::uint64_t seed, double error_rate);

}  // namespace shotweave

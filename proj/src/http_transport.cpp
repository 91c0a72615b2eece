#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "shotweave/gen_clients.hpp"
#include "shotweave/hashing.hpp"

namespace shotweave {

namespace {

using nlohmann::json;

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

ParsedUrl parse_url(const std::string& url) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) {
        throw TransportError("http: malformed base_url '" + url + "'", false);
    }
    ParsedUrl out{m[1].str(), m[2].matched ? m[2].str() : ""};
    while (!out.prefix.empty() && out.prefix.back() == '/') {
        out.prefix.pop_back();
    }
    return out;
}

}  // namespace

TransportReply HttpTransport::send(const ModelEndpoint& endpoint, const GenRequest& request,
                                   const ArtifactStore& store) {
    const ParsedUrl url = parse_url(endpoint.base_url);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    httplib::Headers headers;
    if (!endpoint.auth_ref.empty()) {
        const char* secret = std::getenv(endpoint.auth_ref.c_str());
        if (!secret) {
            throw TransportError("http: secret " + endpoint.auth_ref + " is not set", false);
        }
        headers.emplace("Authorization", std::string("Bearer ") + secret);
    }

    json inputs = json::object();
    for (const char* key : {"source", "first", "last", "control_field"}) {
        if (request.payload.contains(key)) {
            inputs[key] = base64_encode(store.read(request.payload.at(key).get<std::string>()));
        }
    }
    const json body{{"model_id", endpoint.model_id},
                    {"kind", to_string(request.kind)},
                    {"seed", request.seed},
                    {"payload", request.payload},
                    {"inputs", inputs}};

    const std::string path = url.prefix + "/" + std::string(to_string(request.kind));
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("http: " + httplib::to_string(res.error()), true);
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("http: status " + std::to_string(res->status), true, res->status);
    }
    if (res->status >= 400) {
        throw TransportError("http: status " + std::to_string(res->status) + ": " + res->body, false, res->status);
    }

    json reply_doc;
    try {
        reply_doc = json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw TransportError(std::string("http: malformed reply: ") + e.what(), true, res->status);
    }
    TransportReply reply;
    reply.metadata = reply_doc.value("metadata", json::object());
    if (reply_doc.contains("text")) {
        reply.bytes = reply_doc.at("text").get<std::string>();
        reply.media_type = reply_doc.value("media_type", std::string(kMediaText));
    } else if (reply_doc.contains("data_base64")) {
        reply.bytes = base64_decode(reply_doc.at("data_base64").get<std::string>());
        reply.media_type = reply_doc.at("media_type").get<std::string>();
    } else {
        throw TransportError("http: reply carries neither text nor data_base64", false, res->status);
    }
    return reply;
}

}  // namespace shotweave

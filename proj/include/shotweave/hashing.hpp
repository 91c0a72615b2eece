#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace shotweave {

// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
// Throws ValidationError on malformed input.
std::string base64_decode(std::string_view text);

// Canonical text form of a structured document: keys sorted, no whitespace.
// nlohmann::json objects are ordered maps, so dump() is already canonical.
inline std::string canonical_json(const nlohmann::json& doc) { return doc.dump(); }

}  // namespace shotweave

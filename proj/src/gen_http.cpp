// Real HTTP transport for the generation client: chat-completions style POST
// with the credential taken from an environment variable. Isolated here so
// the rest of the module builds without pulling in httplib.

#include <cstdlib>
#include <string>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <json.hpp>

#include "grpoqa/datagen.hpp"
#include "grpoqa/errors.hpp"

namespace grpoqa {

using nlohmann::json;

namespace {

// splits "https://host:port/path" into (scheme://host:port, /path)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw InputError("endpoint must start with http:// or https://: " + endpoint);
    }
    const std::size_t path = endpoint.find('/', scheme + 3);
    if (path == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path), endpoint.substr(path)};
}

} // namespace

TransportResponse http_transport(const GenClientConfig& config, const std::string& prompt) {
    TransportResponse out;
    const char* key = config.api_key_env.empty() ? nullptr : std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw InputError("missing credential: set " + config.api_key_env + " or use the mock client");
    }

    const auto [base, path] = split_endpoint(config.endpoint);
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::duration<double>(config.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(config.timeout_seconds));
    client.set_bearer_token_auth(key);

    json body;
    body["model"] = config.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});

    const httplib::Result res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        out.transport_error = true;
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    if (res->status != 200) {
        out.body = res->body;
        return out;
    }
    try {
        json reply = json::parse(res->body);
        out.body = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ServiceError(std::string("malformed service reply: ") + e.what());
    }
    return out;
}

} // namespace grpoqa

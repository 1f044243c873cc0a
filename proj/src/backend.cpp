#include "threatgeo/backend.hpp"

#include <cstdlib>

#include "threatgeo/io.hpp"
#include "threatgeo/record.hpp"

#include <httplib.h>

namespace threatgeo::extract {

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
    MockBackend mock;
    auto j = ordered_json::parse(io::read_file(path));
    if (j.contains("responses")) {
        for (const auto& e : j["responses"]) {
            Entry entry;
            entry.needle = e.at("contains").get<std::string>();
            if (e.contains("transport_error") && e["transport_error"].get<bool>()) {
                entry.transport_error = true;
                entry.body = e.value("message", "mock transport error");
            } else {
                const auto& body = e.at("body");
                entry.body = body.is_string() ? body.get<std::string>() : body.dump();
            }
            mock.entries_.push_back(std::move(entry));
        }
    }
    if (j.contains("default")) {
        const auto& body = j["default"];
        mock.set_default_body(body.is_string() ? body.get<std::string>() : body.dump());
    }
    return mock;
}

void MockBackend::add_response(std::string needle, std::string body) {
    entries_.push_back({std::move(needle), std::move(body), false});
}

void MockBackend::add_transport_error(std::string needle, std::string message) {
    entries_.push_back({std::move(needle), std::move(message), true});
}

void MockBackend::set_default_body(std::string body) {
    default_body_ = std::move(body);
    has_default_ = true;
}

void MockBackend::set_handler(std::function<std::string(const std::string&)> handler) {
    handler_ = std::move(handler);
}

std::string MockBackend::send(const std::string& prompt) {
    call_starts_.push_back(std::chrono::steady_clock::now());
    for (const auto& e : entries_) {
        if (prompt.find(e.needle) != std::string::npos) {
            if (e.transport_error) throw TransportError(e.body);
            return e.body;
        }
    }
    if (handler_) return handler_(prompt);
    if (has_default_) return default_body_;
    throw TransportError("mock backend has no response for prompt");
}

HttpBackend::HttpBackend(std::string endpoint, std::string model_id, double temperature,
                         std::string response_mime)
    : endpoint_(std::move(endpoint)),
      model_id_(std::move(model_id)),
      temperature_(temperature),
      response_mime_(std::move(response_mime)) {}

std::string HttpBackend::send(const std::string& prompt) {
    const char* key = std::getenv("THREATGEO_API_KEY");
    if (!key || !*key) {
        throw TransportError("THREATGEO_API_KEY is not set; live backend unavailable");
    }

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (endpoint_.rfind("https://", 0) == 0) {
        throw TransportError("built without TLS support; https endpoint unavailable");
    }
#endif

    ordered_json req;
    req["contents"] = ordered_json::array(
        {{{"parts", ordered_json::array({{{"text", prompt}}})}}});
    req["generationConfig"] = {{"temperature", temperature_},
                               {"response_mime_type", response_mime_}};

    httplib::Client client(endpoint_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);

    std::string path = "/v1beta/models/" + model_id_ + ":generateContent?key=" + key;
    auto res = client.Post(path, req.dump(), "application/json");
    if (!res) {
        throw TransportError("backend request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("backend returned status " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw TransportError("backend returned status " + std::to_string(res->status) + ": " +
                             res->body);
    }

    // Unwrap candidates[0].content.parts[*].text; fall back to the raw body.
    auto j = ordered_json::parse(res->body, nullptr, false);
    if (!j.is_discarded() && j.contains("candidates") && !j["candidates"].empty()) {
        const auto& content = j["candidates"][0]["content"];
        if (content.contains("parts")) {
            std::string text;
            for (const auto& part : content["parts"]) {
                if (part.contains("text")) text += part["text"].get<std::string>();
            }
            if (!text.empty()) return text;
        }
    }
    return res->body;
}

}  // namespace threatgeo::extract

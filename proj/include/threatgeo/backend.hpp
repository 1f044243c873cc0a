#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace threatgeo::extract {

// Raised for transport-level failures (connection refused, quota, 5xx).
// These are retried; anything else is not.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimal inference transport: one prompt in, one response body out.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string model_id() const = 0;
    virtual std::string send(const std::string& prompt) = 0;
};

// Table-driven deterministic backend for tests and offline runs. An entry
// matches when its needle occurs in the prompt (descriptions are embedded
// verbatim, so needles are usually description fragments or record ids).
// Records every call start time for rate-contract assertions.
class MockBackend : public Backend {
public:
    struct Entry {
        std::string needle;
        std::string body;
        bool transport_error = false;
    };

    MockBackend() = default;

    static MockBackend from_file(const std::filesystem::path& path);

    void add_response(std::string needle, std::string body);
    void add_transport_error(std::string needle, std::string message);
    void set_default_body(std::string body);
    void set_handler(std::function<std::string(const std::string&)> handler);

    std::string model_id() const override { return "mock"; }
    std::string send(const std::string& prompt) override;

    size_t call_count() const { return call_starts_.size(); }
    const std::vector<std::chrono::steady_clock::time_point>& call_starts() const {
        return call_starts_;
    }

private:
    std::vector<Entry> entries_;
    std::string default_body_;
    bool has_default_ = false;
    std::function<std::string(const std::string&)> handler_;
    std::vector<std::chrono::steady_clock::time_point> call_starts_;
};

// Live HTTPS backend for a Gemini-style generateContent endpoint. The API key
// comes from the THREATGEO_API_KEY environment variable, never from flags or
// files. Requires a TLS-enabled build for https endpoints.
class HttpBackend : public Backend {
public:
    HttpBackend(std::string endpoint, std::string model_id, double temperature,
                std::string response_mime = "application/json");

    std::string model_id() const override { return model_id_; }
    std::string send(const std::string& prompt) override;

private:
    std::string endpoint_;
    std::string model_id_;
    double temperature_;
    std::string response_mime_;
};

}  // namespace threatgeo::extract

#pragma once

// Drives chat-completion endpoints through the trial protocol: prompt
// rendering, response parsing with bounded repair, bounded-parallel
// execution and transcript capture.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cascade/core.hpp"
#include "cascade/transcript.hpp"
#include "cascade/trialgen.hpp"

namespace cascade {

struct EndpointConfig {
    std::string base_url;  // e.g. "https://api.openai.com/v1"
    std::string model_name;
    std::string api_key_env_var = "OPENAI_API_KEY";
    int max_concurrent_requests = 4;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    // Passed through verbatim into the request body (temperature, top_p, ...).
    nlohmann::json decoding = nlohmann::json::object();
    // Base delay of the transport-error backoff; doubles per retry.
    double backoff_seconds = 1.0;

    void validate() const;
};

EndpointConfig endpoint_from_json(const nlohmann::json& j);

// Appended to the user message when a completion could not be parsed.
extern const char* const kRepairSuffix;

// Throws ValidationError naming an unknown or missing placeholder.
std::string render_prompt(const Scenario& scenario, const Trial& trial);

struct ParseFailure {
    FailureReason reason;
    std::string detail;
};

using ParseResult = std::variant<AgentResponse, ParseFailure>;

// Total: every input maps to a response or a failure reason.
ParseResult parse_response(std::string_view raw, const Scenario& scenario);

// --- transport -----------------------------------------------------------

struct ChatCall {
    nlohmann::json body;  // OpenAI-style chat-completion request
    std::string trial_id;
    int repetition_index = 0;
    int attempt = 0;
};

struct ChatReply {
    std::string content;
    std::optional<TokenUsage> usage;
};

class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, bool retryable)
        : std::runtime_error(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

// Implementations must be safe to call from several threads at once.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual ChatReply send(const ChatCall& call) = 0;
};

class HttpTransport : public ChatTransport {
public:
    // Reads the API key from the configured environment variable, if set.
    explicit HttpTransport(EndpointConfig config);
    ChatReply send(const ChatCall& call) override;

private:
    EndpointConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
};

// Hex SHA-256 of the canonical request body; the replay fixture key.
std::string request_hash(const nlohmann::json& body);

// Canned responses keyed by request hash. An entry is either one response
// object or an array indexed by repetition (the last element repeats).
// A response object is {"content": "...", "usage": {...}} or
// {"transport_error": "..."}.
class ReplayFixture {
public:
    ReplayFixture() = default;
    explicit ReplayFixture(nlohmann::json doc);
    static ReplayFixture load(const std::string& path);

    const nlohmann::json& document() const { return doc_; }
    // Throws TransportError (not retryable) for unknown requests.
    ChatReply lookup(const nlohmann::json& body, int repetition_index) const;
    void put(const nlohmann::json& body, int repetition_index, const ChatReply& reply);

private:
    nlohmann::json doc_ = {{"format", "cascade-replay/1"}, {"responses", nlohmann::json::object()}};
};

class ReplayTransport : public ChatTransport {
public:
    explicit ReplayTransport(ReplayFixture fixture) : fixture_(std::move(fixture)) {}
    ChatReply send(const ChatCall& call) override { return fixture_.lookup(call.body, call.repetition_index); }

private:
    ReplayFixture fixture_;
};

// Forwards to another transport and stores each successful reply.
class RecordingTransport : public ChatTransport {
public:
    explicit RecordingTransport(ChatTransport& inner) : inner_(inner) {}
    ChatReply send(const ChatCall& call) override;
    ReplayFixture fixture() const;

private:
    ChatTransport& inner_;
    mutable std::mutex mu_;
    ReplayFixture recorded_;
};

// Serves a fixture over HTTP on 127.0.0.1 using the chat-completion wire
// format, so HttpTransport can be exercised offline.
class ReplayServer {
public:
    explicit ReplayServer(ReplayFixture fixture);
    ~ReplayServer();
    ReplayServer(const ReplayServer&) = delete;
    ReplayServer& operator=(const ReplayServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const;
    long requests_served() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

// --- sessions ------------------------------------------------------------

struct SessionOptions {
    int repetitions = 3;
    std::string run_id;
    // Wall-clock latency makes transcripts non-reproducible; off for replays.
    bool record_timing = true;
};

// One transcript per (trial, repetition) in canonical order, whatever the
// completion order or failures.
std::vector<Transcript> run_session(const Manifest& manifest, const Scenario& scenario,
                                    const EndpointConfig& endpoint, ChatTransport& transport,
                                    const SessionOptions& options);

nlohmann::json chat_request_body(const EndpointConfig& endpoint, const Scenario& scenario,
                                 const std::string& user_content);

}  // namespace cascade

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>

#include <fmt/format.h>

#include "cascade/json_io.hpp"
#include "cascade/runner.hpp"

namespace cascade {

void EndpointConfig::validate() const {
    if (model_name.empty()) throw ValidationError("endpoint model_name is empty");
    if (max_concurrent_requests < 1) throw ValidationError("max_concurrent_requests must be >= 1");
    if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
    if (!(timeout_seconds > 0.0)) throw ValidationError("timeout must be > 0");
    if (!(backoff_seconds >= 0.0)) throw ValidationError("backoff must be >= 0");
    if (!decoding.is_object()) throw ValidationError("decoding parameters must be a JSON object");
}

EndpointConfig endpoint_from_json(const json& j) {
    EndpointConfig c;
    c.base_url = j.value("base_url", "");
    c.model_name = require<std::string>(j, "model_name");
    c.api_key_env_var = j.value("api_key_env_var", c.api_key_env_var);
    c.max_concurrent_requests = j.value("max_concurrent_requests", c.max_concurrent_requests);
    c.timeout_seconds = j.value("timeout", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_seconds = j.value("backoff", c.backoff_seconds);
    if (j.contains("decoding")) c.decoding = j["decoding"];
    if (j.contains("api_key")) throw ValidationError("API keys are read from the environment, not config files");
    c.validate();
    return c;
}

json chat_request_body(const EndpointConfig& endpoint, const Scenario& scenario,
                       const std::string& user_content) {
    json body{{"model", endpoint.model_name},
              {"messages", json::array({json{{"role", "system"}, {"content", scenario.system_prompt}},
                                        json{{"role", "user"}, {"content", user_content}}})}};
    for (const auto& [key, value] : endpoint.decoding.items()) body[key] = value;
    return body;
}

std::string request_hash(const json& body) { return sha256_hex(body.dump()); }

// --- HTTP ---------------------------------------------------------------

HttpTransport::HttpTransport(EndpointConfig config) : config_(std::move(config)) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, url_re))
        throw ValidationError(fmt::format("base_url '{}' is not an http(s) URL", config_.base_url));
    scheme_host_port_ = m[1].str();
    path_ = m[2].str();
    while (path_.ends_with("/")) path_.pop_back();
    path_ += "/chat/completions";
    if (const char* key = std::getenv(config_.api_key_env_var.c_str())) api_key_ = key;
}

namespace {

ChatReply reply_from_completion(const json& doc) {
    ChatReply reply;
    try {
        reply.content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(fmt::format("completion lacks choices[0].message.content: {}", e.what()), true);
    }
    if (doc.contains("usage") && doc["usage"].is_object())
        reply.usage = TokenUsage{doc["usage"].value("prompt_tokens", 0L), doc["usage"].value("completion_tokens", 0L)};
    return reply;
}

json completion_document(const ChatReply& reply) {
    json doc{{"object", "chat.completion"},
             {"choices", json::array({json{{"index", 0},
                                           {"message", {{"role", "assistant"}, {"content", reply.content}}},
                                           {"finish_reason", "stop"}}})}};
    if (reply.usage)
        doc["usage"] = {{"prompt_tokens", reply.usage->prompt_tokens},
                        {"completion_tokens", reply.usage->completion_tokens},
                        {"total_tokens", reply.usage->prompt_tokens + reply.usage->completion_tokens}};
    return doc;
}

}  // namespace

ChatReply HttpTransport::send(const ChatCall& call) {
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs = static_cast<time_t>((config_.timeout_seconds - secs) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers{{"X-Cascade-Trial", call.trial_id},
                             {"X-Cascade-Repetition", std::to_string(call.repetition_index)}};
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_, headers, call.body.dump(), "application/json");
    if (!res) throw TransportError(fmt::format("request failed: {}", httplib::to_string(res.error())), true);
    if (res->status == 429 || res->status >= 500)
        throw TransportError(fmt::format("HTTP {}", res->status), true);
    if (res->status != 200)
        throw TransportError(fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200)), false);
    json doc;
    try {
        doc = json::parse(res->body);
    } catch (const json::exception&) {
        throw TransportError("response body is not JSON", true);
    }
    return reply_from_completion(doc);
}

// --- replay ---------------------------------------------------------------

ReplayFixture::ReplayFixture(json doc) : doc_(std::move(doc)) {
    if (!doc_.is_object() || !doc_.contains("responses") || !doc_["responses"].is_object())
        throw ValidationError("replay fixture needs a 'responses' object");
}

ReplayFixture ReplayFixture::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open replay fixture {}", path));
    try {
        return ReplayFixture(json::parse(in));
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("replay fixture {}: {}", path, e.what()));
    }
}

ChatReply ReplayFixture::lookup(const json& body, int repetition_index) const {
    const auto key = request_hash(body);
    const auto& responses = doc_["responses"];
    auto it = responses.find(key);
    if (it == responses.end()) throw TransportError(fmt::format("no recorded response for request {}", key), false);
    const json* entry = &*it;
    if (entry->is_array()) {
        if (entry->empty()) throw TransportError("empty response list for request " + key, false);
        const auto idx = std::min<std::size_t>(static_cast<std::size_t>(std::max(repetition_index, 0)),
                                               entry->size() - 1);
        entry = &(*entry)[idx];
    }
    if (entry->contains("transport_error"))
        throw TransportError((*entry)["transport_error"].get<std::string>(), true);
    ChatReply reply;
    reply.content = entry->value("content", "");
    if (entry->contains("usage"))
        reply.usage = TokenUsage{(*entry)["usage"].value("prompt_tokens", 0L),
                                 (*entry)["usage"].value("completion_tokens", 0L)};
    return reply;
}

void ReplayFixture::put(const json& body, int repetition_index, const ChatReply& reply) {
    json entry{{"content", reply.content}};
    if (reply.usage)
        entry["usage"] = {{"prompt_tokens", reply.usage->prompt_tokens},
                          {"completion_tokens", reply.usage->completion_tokens}};
    auto& slot = doc_["responses"][request_hash(body)];
    if (!slot.is_array()) slot = json::array();
    while (static_cast<int>(slot.size()) <= repetition_index) slot.push_back(nullptr);
    slot[repetition_index] = std::move(entry);
    // Holes left by unrecorded repetitions fall back to the nearest earlier entry.
    for (std::size_t i = 1; i < slot.size(); ++i)
        if (slot[i].is_null()) slot[i] = slot[i - 1];
    if (slot[0].is_null()) {
        for (std::size_t i = 1; i < slot.size(); ++i)
            if (!slot[i].is_null()) {
                slot[0] = slot[i];
                break;
            }
    }
}

ChatReply RecordingTransport::send(const ChatCall& call) {
    ChatReply reply = inner_.send(call);
    std::lock_guard lock(mu_);
    recorded_.put(call.body, call.repetition_index, reply);
    return reply;
}

ReplayFixture RecordingTransport::fixture() const {
    std::lock_guard lock(mu_);
    return recorded_;
}

struct ReplayServer::Impl {
    ReplayFixture fixture;
    httplib::Server server;
    std::thread thread;
    std::atomic<long> served{0};
};

ReplayServer::ReplayServer(ReplayFixture fixture) : impl_(std::make_unique<Impl>()) {
    impl_->fixture = std::move(fixture);
    impl_->server.Post(R"(.*/chat/completions)", [impl = impl_.get()](const httplib::Request& req,
                                                                     httplib::Response& res) {
        ++impl->served;
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            res.status = 400;
            return;
        }
        int rep = 0;
        if (req.has_header("X-Cascade-Repetition")) rep = std::stoi(req.get_header_value("X-Cascade-Repetition"));
        try {
            res.set_content(completion_document(impl->fixture.lookup(body, rep)).dump(), "application/json");
        } catch (const TransportError& e) {
            res.status = e.retryable() ? 503 : 404;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("replay server could not bind a port");
    impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

ReplayServer::~ReplayServer() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

std::string ReplayServer::base_url() const { return fmt::format("http://127.0.0.1:{}/v1", port_); }

long ReplayServer::requests_served() const { return impl_->served.load(); }

// --- sessions ---------------------------------------------------------------

namespace {

void run_one(Transcript& t, const Scenario& scenario, const EndpointConfig& endpoint,
             ChatTransport& transport, bool record_timing) {
    const auto started = std::chrono::steady_clock::now();
    std::string user = t.rendered_prompt;
    TokenUsage usage;
    bool any_usage = false;
    for (int parse_attempt = 0;; ++parse_attempt) {
        ChatCall call{chat_request_body(endpoint, scenario, user), t.trial.trial_id, t.repetition_index,
                      parse_attempt};
        std::optional<ChatReply> reply;
        std::string transport_error;
        for (int tries = 0; tries <= endpoint.max_retries; ++tries) {
            try {
                reply = transport.send(call);
                break;
            } catch (const TransportError& e) {
                transport_error = e.what();
                if (!e.retryable()) break;
            } catch (const std::exception& e) {
                transport_error = e.what();
                break;
            }
            if (tries < endpoint.max_retries && endpoint.backoff_seconds > 0.0)
                std::this_thread::sleep_for(
                    std::chrono::duration<double>(endpoint.backoff_seconds * std::pow(2.0, tries)));
        }
        t.attempts = parse_attempt + 1;
        if (!reply) {
            t.failure = FailureReason::transport_failure;
            t.failure_detail = transport_error;
            break;
        }
        if (reply->usage) {
            any_usage = true;
            usage.prompt_tokens += reply->usage->prompt_tokens;
            usage.completion_tokens += reply->usage->completion_tokens;
        }
        auto parsed = parse_response(reply->content, scenario);
        if (auto* ok = std::get_if<AgentResponse>(&parsed)) {
            ok->trial_id = t.trial.trial_id;
            ok->repetition_index = t.repetition_index;
            t.parsed = std::move(*ok);
            t.raw_completion = std::move(reply->content);
            break;
        }
        const auto& fail = std::get<ParseFailure>(parsed);
        if (parse_attempt < endpoint.max_retries) {
            t.rejected_completions.push_back(std::move(reply->content));
            user = t.rendered_prompt + kRepairSuffix;
            continue;
        }
        t.raw_completion = std::move(reply->content);
        t.failure = fail.reason;
        t.failure_detail = fail.detail;
        break;
    }
    if (any_usage) t.usage = usage;
    if (record_timing)
        t.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
}

}  // namespace

std::vector<Transcript> run_session(const Manifest& manifest, const Scenario& scenario,
                                    const EndpointConfig& endpoint, ChatTransport& transport,
                                    const SessionOptions& options) {
    endpoint.validate();
    if (options.repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (manifest.scenario_id != scenario.id)
        throw ValidationError(fmt::format("manifest is for {}, scenario is {}",
                                          to_string(manifest.scenario_id), to_string(scenario.id)));

    const std::size_t reps = options.repetitions;
    std::vector<Transcript> out(manifest.trials.size() * reps);
    for (std::size_t i = 0; i < manifest.trials.size(); ++i) {
        const std::string prompt = render_prompt(scenario, manifest.trials[i]);
        for (std::size_t r = 0; r < reps; ++r) {
            auto& t = out[i * reps + r];
            t.run_id = options.run_id;
            t.design_digest = manifest.design_digest;
            t.scenario_id = scenario.id;
            t.q = scenario.q;
            t.model_name = endpoint.model_name;
            t.repetition_index = static_cast<int>(r);
            t.trial = manifest.trials[i];
            t.rendered_prompt = prompt;
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < out.size(); j = next++)
            run_one(out[j], scenario, endpoint, transport, options.record_timing);
    };
    const auto n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(endpoint.max_concurrent_requests), out.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
        worker();
    }
    return out;
}

}  // namespace cascade

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hive/errors.hpp"
#include "hive/llm_bridge.hpp"
#include "hive/log.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hive::llm {

using nlohmann::json;

std::string_view role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

std::string_view provider_error_name(ProviderError::Kind k) {
    switch (k) {
        case ProviderError::Kind::Config: return "config";
        case ProviderError::Kind::Auth: return "auth";
        case ProviderError::Kind::Quota: return "quota";
        case ProviderError::Kind::Timeout: return "timeout";
        case ProviderError::Kind::Transport: return "transport";
        case ProviderError::Kind::Protocol: return "protocol";
        case ProviderError::Kind::Missing: return "missing";
    }
    return "?";
}

Transcript::Transcript(std::string system_prompt) { messages_.push_back({Role::System, std::move(system_prompt)}); }

void Transcript::push(Role role, std::string content) { messages_.push_back({role, std::move(content)}); }

void ProviderConfig::validate() const {
    if (provider != "mock" && provider != "openai" && provider != "anthropic")
        throw ValidationError("unknown provider '" + provider + "' (expected mock, openai or anthropic)");
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw ValidationError("temperature must be within [0, 2], got " + std::to_string(temperature));
    if (max_tokens <= 0) throw ValidationError("max tokens must be positive");
    if (!(timeout_s > 0.0)) throw ValidationError("request timeout must be positive");
    if (transport_retries < 0 || transport_retries > 2) throw ValidationError("transport retries must be 0, 1 or 2");
    if (model.empty()) throw ValidationError("model name is empty");
}

ProviderConfig ProviderConfig::defaults_for(const std::string& provider) {
    ProviderConfig c;
    c.provider = provider;
    if (provider == "openai") {
        c.endpoint = "https://api.openai.com";
        c.credential_env = "OPENAI_API_KEY";
        c.model = "gpt-4o";
    } else if (provider == "anthropic") {
        c.endpoint = "https://api.anthropic.com";
        c.credential_env = "ANTHROPIC_API_KEY";
        c.model = "claude-3-5-sonnet-20240620";
    }
    return c;
}

// ---- mock --------------------------------------------------------------

MockProvider::MockProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}

void MockProvider::select(std::string key, int prompt_index) {
    std::lock_guard lock(mu_);
    key_ = std::move(key);
    index_ = prompt_index;
}

std::vector<MockProvider::Request> MockProvider::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

Completion MockProvider::complete(const ProviderConfig& config, const std::vector<Message>& messages) {
    std::filesystem::path file;
    {
        std::lock_guard lock(mu_);
        requests_.push_back({config.model, config.temperature, config.max_tokens, messages});
        for (auto candidate : {dir_ / key_ / (std::to_string(index_) + ".txt"), dir_ / (key_ + ".txt"), dir_ / "default.txt"}) {
            if (!key_.empty() || candidate.filename() == "default.txt") {
                if (std::filesystem::is_regular_file(candidate)) {
                    file = candidate;
                    break;
                }
            }
        }
        if (file.empty())
            throw ProviderError(ProviderError::Kind::Missing,
                                "no mock fixture for '" + key_ + "' prompt " + std::to_string(index_) + " in " + dir_.string());
    }
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    Completion c;
    c.text = ss.str();
    c.completion_tokens = static_cast<int>(c.text.size() / 4);
    return c;
}

// ---- HTTP --------------------------------------------------------------

namespace {

std::string credential(const ProviderConfig& config) {
    if (config.credential_env.empty())
        throw ProviderError(ProviderError::Kind::Config, "provider " + config.provider + " needs a credential variable");
    const char* v = std::getenv(config.credential_env.c_str());
    if (!v || !*v)
        throw ProviderError(ProviderError::Kind::Auth, "environment variable " + config.credential_env + " is not set");
    return v;
}

httplib::Result post_json(const ProviderConfig& config, const std::string& path, const httplib::Headers& headers,
                          const json& body) {
    if (config.endpoint.empty()) throw ProviderError(ProviderError::Kind::Config, "no endpoint configured");
    std::unique_ptr<httplib::Client> client;
    try {
        client = std::make_unique<httplib::Client>(config.endpoint);
    } catch (const std::exception& e) {
        throw ProviderError(ProviderError::Kind::Config, "bad endpoint " + config.endpoint + ": " + e.what());
    }
    if (!client->is_valid()) throw ProviderError(ProviderError::Kind::Config, "bad endpoint " + config.endpoint);
    const auto secs = static_cast<time_t>(config.timeout_s);
    const auto usecs = static_cast<time_t>((config.timeout_s - static_cast<double>(secs)) * 1e6);
    client->set_connection_timeout(std::min<time_t>(secs, 10), secs >= 10 ? 0 : usecs);
    client->set_read_timeout(secs, usecs);
    client->set_write_timeout(secs, usecs);
    return client->Post(path, headers, body.dump(), "application/json");
}

json check_response(const httplib::Result& res) {
    if (!res) {
        const auto err = res.error();
        const auto what = httplib::to_string(err);
        if (err == httplib::Error::Connection || err == httplib::Error::ConnectionTimeout ||
            err == httplib::Error::SSLConnection || err == httplib::Error::BindIPAddress)
            throw ProviderError(ProviderError::Kind::Transport, "connection failed: " + what);
        if (err == httplib::Error::Read) throw ProviderError(ProviderError::Kind::Timeout, "no response: " + what);
        throw ProviderError(ProviderError::Kind::Protocol, "request failed: " + what);
    }
    const int status = res->status;
    if (status == 401 || status == 403) throw ProviderError(ProviderError::Kind::Auth, "rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 429) throw ProviderError(ProviderError::Kind::Quota, "rate limited or out of quota (HTTP 429)");
    if (status == 408 || status == 504) throw ProviderError(ProviderError::Kind::Timeout, "provider timed out (HTTP " + std::to_string(status) + ")");
    if (status < 200 || status >= 300)
        throw ProviderError(ProviderError::Kind::Protocol, "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 300));
    try {
        return json::parse(res->body);
    } catch (const json::parse_error&) {
        throw ProviderError(ProviderError::Kind::Protocol, "response body is not JSON");
    }
}

}  // namespace

Completion OpenAIProvider::complete(const ProviderConfig& config, const std::vector<Message>& messages) {
    json body = {{"model", config.model}, {"temperature", config.temperature}, {"max_tokens", config.max_tokens}};
    body["messages"] = json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    const httplib::Headers headers = {{"Authorization", "Bearer " + credential(config)}};
    const auto j = check_response(post_json(config, "/v1/chat/completions", headers, body));
    try {
        Completion c;
        const auto& choice = j.at("choices").at(0);
        c.text = choice.at("message").at("content").get<std::string>();
        c.truncated = choice.value("finish_reason", "") == "length";
        if (j.contains("usage")) {
            c.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            c.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        return c;
    } catch (const json::exception& e) {
        throw ProviderError(ProviderError::Kind::Protocol, std::string("unexpected response shape: ") + e.what());
    }
}

Completion AnthropicProvider::complete(const ProviderConfig& config, const std::vector<Message>& messages) {
    json body = {{"model", config.model}, {"temperature", config.temperature}, {"max_tokens", config.max_tokens}};
    body["messages"] = json::array();
    for (const auto& m : messages) {
        if (m.role == Role::System) body["system"] = m.content;
        else body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    const httplib::Headers headers = {{"x-api-key", credential(config)}, {"anthropic-version", "2023-06-01"}};
    const auto j = check_response(post_json(config, "/v1/messages", headers, body));
    try {
        Completion c;
        for (const auto& part : j.at("content"))
            if (part.value("type", "") == "text") c.text += part.at("text").get<std::string>();
        c.truncated = j.value("stop_reason", "") == "max_tokens";
        if (j.contains("usage")) {
            c.prompt_tokens = j["usage"].value("input_tokens", 0);
            c.completion_tokens = j["usage"].value("output_tokens", 0);
        }
        return c;
    } catch (const json::exception& e) {
        throw ProviderError(ProviderError::Kind::Protocol, std::string("unexpected response shape: ") + e.what());
    }
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& config, const std::filesystem::path& mock_dir) {
    config.validate();
    if (config.provider == "mock") {
        if (mock_dir.empty()) throw ValidationError("the mock provider needs a fixture directory");
        if (!std::filesystem::is_directory(mock_dir)) throw ValidationError("fixture directory " + mock_dir.string() + " does not exist");
        return std::make_unique<MockProvider>(mock_dir);
    }
    if (config.provider == "openai") return std::make_unique<OpenAIProvider>();
    return std::make_unique<AnthropicProvider>();
}

Reply query_model(Provider& provider, const ProviderConfig& config, Transcript& transcript,
                  const std::string& user_message) {
    auto messages = transcript.messages();
    messages.push_back({Role::User, user_message});
    const auto started = std::chrono::steady_clock::now();
    Reply reply;
    for (int attempt = 1;; ++attempt) {
        try {
            auto c = provider.complete(config, messages);
            reply.text = std::move(c.text);
            reply.exchange.prompt_tokens = c.prompt_tokens;
            reply.exchange.completion_tokens = c.completion_tokens;
            reply.exchange.truncated = c.truncated;
            reply.exchange.attempts = attempt;
            break;
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt > config.transport_retries) throw;
            log::warn(std::string("provider ") + provider.name() + ": " + e.what() + "; retrying");
        }
    }
    reply.exchange.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (reply.exchange.truncated)
        log::warn("model output hit the max token limit (" + std::to_string(config.max_tokens) + ")");
    transcript.push(Role::User, user_message);
    transcript.push(Role::Assistant, reply.text);
    transcript.record(reply.exchange);
    return reply;
}

}  // namespace hive::llm

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hive/scenario.hpp"

namespace hive::llm {

enum class Role { System, User, Assistant };
std::string_view role_name(Role r);

struct Message {
    Role role = Role::User;
    std::string content;
    bool operator==(const Message&) const = default;
};

/// Accounting for one user/assistant exchange.
struct Exchange {
    double latency_s = 0.0;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    bool truncated = false;  // provider stopped at max tokens
    int attempts = 1;
};

class Transcript {
public:
    explicit Transcript(std::string system_prompt);

    const std::vector<Message>& messages() const { return messages_; }
    const std::vector<Exchange>& exchanges() const { return exchanges_; }
    const std::string& system_prompt() const { return messages_.front().content; }

    void push(Role role, std::string content);
    void record(const Exchange& e) { exchanges_.push_back(e); }

private:
    std::vector<Message> messages_;
    std::vector<Exchange> exchanges_;
};

struct ProviderConfig {
    std::string provider = "mock";  // mock, openai, anthropic
    std::string model = "fixture";
    std::string endpoint;           // base URL; empty means the vendor default
    double temperature = 0.0;
    int max_tokens = 4096;
    /// Name of the environment variable holding the API key. The key itself
    /// is read at request time and never stored.
    std::string credential_env;
    double timeout_s = 120.0;
    int transport_retries = 2;

    /// Throws ValidationError on an unknown provider or out-of-range values.
    void validate() const;
    /// Vendor defaults for endpoint and credential variable.
    static ProviderConfig defaults_for(const std::string& provider);
};

class ProviderError : public std::runtime_error {
public:
    enum class Kind { Config, Auth, Quota, Timeout, Transport, Protocol, Missing };
    ProviderError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }
    /// Only connection-level failures are retried.
    bool retryable() const { return kind_ == Kind::Transport; }

private:
    Kind kind_;
};

std::string_view provider_error_name(ProviderError::Kind k);

struct Completion {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    bool truncated = false;
};

/// One chat-completion backend. Implementations map the message list to a
/// vendor wire format and back; prompt assembly never depends on them.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string name() const = 0;
    virtual Completion complete(const ProviderConfig& config, const std::vector<Message>& messages) = 0;
};

/// Offline provider answering from text files. Lookup order for key K and
/// prompt index i: `<dir>/K/<i>.txt`, `<dir>/K.txt`, `<dir>/default.txt`.
/// A missing fixture raises ProviderError(Missing).
class MockProvider : public Provider {
public:
    struct Request {
        std::string model;
        double temperature = 0.0;
        int max_tokens = 0;
        std::vector<Message> messages;
    };

    explicit MockProvider(std::filesystem::path dir);

    void select(std::string key, int prompt_index);
    std::string name() const override { return "mock"; }
    Completion complete(const ProviderConfig& config, const std::vector<Message>& messages) override;

    std::vector<Request> requests() const;

private:
    std::filesystem::path dir_;
    std::string key_;
    int index_ = 0;
    mutable std::mutex mu_;
    std::vector<Request> requests_;
};

/// OpenAI-style /v1/chat/completions.
class OpenAIProvider : public Provider {
public:
    std::string name() const override { return "openai"; }
    Completion complete(const ProviderConfig& config, const std::vector<Message>& messages) override;
};

/// Anthropic-style /v1/messages.
class AnthropicProvider : public Provider {
public:
    std::string name() const override { return "anthropic"; }
    Completion complete(const ProviderConfig& config, const std::vector<Message>& messages) override;
};

/// Mock needs `mock_dir`; the HTTP providers ignore it.
std::unique_ptr<Provider> make_provider(const ProviderConfig& config, const std::filesystem::path& mock_dir = {});

struct Reply {
    std::string text;
    Exchange exchange;
};

/// Sends the transcript plus `user_message` once. Connection failures are
/// retried up to config.transport_retries times; nothing else is. On success
/// both messages and the exchange are appended to the transcript; on failure
/// the transcript is left untouched and ProviderError propagates.
Reply query_model(Provider& provider, const ProviderConfig& config, Transcript& transcript,
                  const std::string& user_message);

/// The system instruction: role preamble, terrain rules, map, markers (when
/// any), unit stats and team composition, plan syntax, planning mistakes and
/// the mission paragraph.
std::string build_system_prompt(const Scenario& scenario, const std::vector<Marker>& markers);

/// "Markers:\nA at (17, 5)\n..." or empty.
std::string markers_block(const std::vector<Marker>& markers);

/// "spearmen: [0:350]" style slices for one team, merging adjacent entries
/// of the same kind.
std::string composition_lines(const std::vector<RosterEntry>& roster);

/// Health and rounded positions of every unit, dead units as ∅.
std::string build_state_message(const GameState& state);

/// The user turn sent to the model: state message followed by the prompt.
std::string build_user_message(const GameState& state, const std::string& prompt);

/// First complete BEGIN/END PLAN block, verbatim; logs a warning when the
/// message holds more than one.
std::optional<std::string> extract_plan_text(std::string_view message);

}  // namespace hive::llm

#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace llmes {

inline constexpr std::string_view kDefaultTuneInstruction =
    "Tune the hyperparameter tau of an Evolution Stratety.\n"
    "The algorithm is a (1+1)-ES with Rechenberg rule and parameter tau.\n"
    "The objective is to maximize the fitness.\n"
    "Return the full Python code, but only change tau.";

inline constexpr std::string_view kDefaultAnalysisInstruction =
    "Analyze the following results concerning the influence of tau on the fitness.\n"
    "Summarize your analysis in one sentence and propose a new value for tau you have not tried.";

inline constexpr std::string_view kParseDirective = "Reply with the single line `tau = <value>`.";

struct PromptPair {
    std::string tune_instruction{kDefaultTuneInstruction};
    std::string analysis_instruction{kDefaultAnalysisInstruction};
    // Appends kParseDirective to the tune prompt.
    bool parse_directive = true;

    bool operator==(const PromptPair&) const = default;
};

// Tune instruction, a blank line, then the parse directive (when enabled).
// Throws PreconditionError for an empty instruction.
std::string render_tune_prompt(const PromptPair& pair);

// Analysis instruction, a blank line, then log_text verbatim.
// Throws PreconditionError for an empty log.
std::string render_analysis_prompt(const PromptPair& pair, std::string_view log_text);

using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

// ISO-8601 with millisecond precision, e.g. "2024-05-01T12:00:00.250Z".
std::string format_utc(UtcTime t);
// Inverse of format_utc. Throws InvalidInputError.
UtcTime parse_utc(std::string_view text);

struct LlmExchange {
    std::string prompt;
    std::string response;  // verbatim
    double latency_ms = 0.0;
    UtcTime timestamp{};
    std::size_t attempt = 0;  // 0 for the first prompt of a proposal
    std::size_t proposal = 0;  // index of the trial this proposal feeds
    std::string error;        // empty unless the call failed

    bool operator==(const LlmExchange&) const = default;
};

enum class BackendKind { http, scripted };

struct LlmBackendConfig {
    BackendKind kind = BackendKind::http;
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model = "llama3";
    double temperature = 0.7;
    double timeout_seconds = 60.0;
    std::size_t transport_retries = 2;
    std::string bearer_token;  // filled from the environment, never persisted
    std::vector<std::string> scripted_responses;

    void validate() const;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    // Sends one single-turn prompt. Throws TransportError on failure.
    virtual LlmExchange send(const std::string& prompt) = 0;
};

// Replays canned responses in order with zero latency and a fixed epoch
// timestamp, so sessions driven by it are byte-reproducible.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> responses);

    LlmExchange send(const std::string& prompt) override;
    std::size_t remaining() const noexcept { return responses_.size(); }

private:
    std::deque<std::string> responses_;
};

// OpenAI-style chat completion over HTTP(S).
class HttpBackend : public LlmBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(LlmBackendConfig config, Sleeper sleeper = {});

    LlmExchange send(const std::string& prompt) override;

    // JSON body posted for `prompt`.
    std::string request_body(const std::string& prompt) const;

private:
    LlmBackendConfig config_;
    Sleeper sleeper_;
};

// Throws ConfigError when the config is invalid.
std::unique_ptr<LlmBackend> make_backend(const LlmBackendConfig& config);

// Pulls choices[0].message.content out of a chat-completion response body.
// Throws TransportError carrying the body when it is malformed.
std::string parse_chat_response(const std::string& body);

// Drops code-fence lines and bare "code"/"python" label lines.
std::string sanitize_response(std::string_view response);

// Last tau proposed in `response`. Recognizes `tau = <number>` and the
// phrases "tau of" / "value for tau" followed by a number in the same
// sentence. Throws ExtractionError when nothing matches or the last match
// is not a positive finite number.
double extract_tau(std::string_view response);

}  // namespace llmes

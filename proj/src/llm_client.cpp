#include "llmes/llm_client.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "llmes/errors.hpp"
#include "llmes/number_format.hpp"

namespace llmes {

using nlohmann::json;

std::string render_tune_prompt(const PromptPair& pair) {
    if (pair.tune_instruction.empty()) throw PreconditionError("tune instruction is empty");
    std::string prompt = pair.tune_instruction;
    if (pair.parse_directive) {
        prompt += "\n\n";
        prompt += kParseDirective;
    }
    return prompt;
}

std::string render_analysis_prompt(const PromptPair& pair, std::string_view log_text) {
    if (log_text.empty()) throw PreconditionError("analysis prompt needs a non-empty log");
    if (pair.analysis_instruction.empty()) throw PreconditionError("analysis instruction is empty");
    std::string prompt = pair.analysis_instruction;
    prompt += "\n\n";
    prompt += log_text;
    return prompt;
}

std::string format_utc(UtcTime t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss tod{t - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld.%03ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                  static_cast<long>(tod.seconds().count()), static_cast<long>(tod.subseconds().count()));
    return buf;
}

UtcTime parse_utc(std::string_view text) {
    using namespace std::chrono;
    static const std::regex pattern(R"((\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})\.(\d{3})Z)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(text.begin(), text.end(), m, pattern))
        throw InvalidInputError("bad UTC timestamp '" + std::string(text) + "'");
    auto field = [&](int i) { return std::stoi(m[i].str()); };
    const year_month_day ymd{year{field(1)}, month{static_cast<unsigned>(field(2))},
                             day{static_cast<unsigned>(field(3))}};
    if (!ymd.ok()) throw InvalidInputError("bad UTC date '" + std::string(text) + "'");
    return sys_days{ymd} + hours{field(4)} + minutes{field(5)} + seconds{field(6)} + milliseconds{field(7)};
}

void LlmBackendConfig::validate() const {
    if (kind == BackendKind::http && base_url.empty()) throw ConfigError("http backend requires a base URL");
    if (kind == BackendKind::scripted && scripted_responses.empty())
        throw ConfigError("scripted backend requires at least one response");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must be in [0, 2]");
    if (!(timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses)
    : responses_(std::make_move_iterator(responses.begin()), std::make_move_iterator(responses.end())) {}

LlmExchange ScriptedBackend::send(const std::string& prompt) {
    if (responses_.empty()) throw TransportError("scripted backend: script exhausted");
    LlmExchange exchange;
    exchange.prompt = prompt;
    exchange.response = std::move(responses_.front());
    responses_.pop_front();
    return exchange;
}

namespace {

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path part of the base URL, no trailing slash
};

UrlParts split_url(const std::string& url) {
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) throw ConfigError("invalid base URL '" + url + "'");
    std::string prefix = m[2].matched ? m[2].str() : "";
    while (prefix.ends_with('/')) prefix.pop_back();
    return {m[1].str(), prefix};
}

std::chrono::milliseconds backoff(std::size_t attempt) {
    return std::chrono::milliseconds(1000LL << attempt);
}

}  // namespace

HttpBackend::HttpBackend(LlmBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
    config_.validate();
    split_url(config_.base_url);
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpBackend::request_body(const std::string& prompt) const {
    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config_.temperature;
    body["stream"] = false;
    return body.dump();
}

std::string parse_chat_response(const std::string& body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw TransportError("malformed JSON in chat response", body);
    try {
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw TransportError("chat response lacks choices[0].message.content", body);
    }
}

LlmExchange HttpBackend::send(const std::string& prompt) {
    const UrlParts url = split_url(config_.base_url);
    const std::string body = request_body(prompt);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));

    std::string last_error;
    std::string last_payload;
    for (std::size_t attempt = 0; attempt <= config_.transport_retries; ++attempt) {
        if (attempt > 0) sleeper_(backoff(attempt - 1));

        httplib::Client client(url.origin);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!config_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + config_.bearer_token);

        const auto start = std::chrono::steady_clock::now();
        const auto stamp = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
        const auto res = client.Post(url.prefix + config_.path, headers, body, "application/json");
        const double latency =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

        if (!res) {
            last_error = "HTTP request to " + config_.base_url + config_.path + " failed: " + httplib::to_string(res.error());
            last_payload.clear();
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP status " + std::to_string(res->status) + " from " + config_.base_url + config_.path;
            last_payload = res->body;
            continue;
        }

        LlmExchange exchange;
        exchange.prompt = prompt;
        exchange.response = parse_chat_response(res->body);
        exchange.latency_ms = latency;
        exchange.timestamp = stamp;
        return exchange;
    }
    throw TransportError(last_error + " (after " + std::to_string(config_.transport_retries + 1) + " attempts)",
                         last_payload);
}

std::unique_ptr<LlmBackend> make_backend(const LlmBackendConfig& config) {
    config.validate();
    if (config.kind == BackendKind::scripted) return std::make_unique<ScriptedBackend>(config.scripted_responses);
    return std::make_unique<HttpBackend>(config);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Numeric literal at the start of `s`, including inf/nan spellings so they
// can be rejected explicitly.
const std::regex& number_pattern() {
    static const std::regex pattern(R"(^[-+]?(?:(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|(?:inf(?:inity)?|nan)(?![a-z0-9_])))",
                                    std::regex::icase);
    return pattern;
}

std::optional<std::string> number_at(std::string_view s) {
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(s.begin(), s.end(), m, number_pattern())) return std::nullopt;
    return m.str(0);
}

bool sentence_ends_at(std::string_view s, std::size_t i) {
    const char c = s[i];
    if (c == '\n' || c == '!' || c == '?' || c == ';') return true;
    if (c == '.') return i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1]));
    return false;
}

bool starts_number(std::string_view s, std::size_t i) {
    auto digit = [&](std::size_t k) { return k < s.size() && std::isdigit(static_cast<unsigned char>(s[k])); };
    if (digit(i)) return true;
    if (s[i] == '.' && digit(i + 1)) return true;
    if ((s[i] == '-' || s[i] == '+') && (digit(i + 1) || (i + 1 < s.size() && s[i + 1] == '.' && digit(i + 2))))
        return true;
    return false;
}

struct Match {
    std::size_t pos;
    std::string literal;
};

void collect_matches(std::string_view text, std::vector<Match>& matches) {
    const std::string low = lower(text);

    // tau = <number>
    for (std::size_t p = low.find("tau"); p != std::string::npos; p = low.find("tau", p + 1)) {
        if (p > 0 && is_word_char(low[p - 1])) continue;
        std::size_t q = p + 3;
        if (q < low.size() && is_word_char(low[q])) continue;
        while (q < low.size() && (low[q] == ' ' || low[q] == '\t')) ++q;
        if (q >= low.size() || low[q] != '=' || (q + 1 < low.size() && low[q + 1] == '=')) continue;
        ++q;
        while (q < low.size() && (low[q] == ' ' || low[q] == '\t')) ++q;
        if (auto lit = number_at(text.substr(q))) matches.push_back({q, *lit});
    }

    // "tau of ..." / "value for tau ..." followed by a number in the same sentence
    for (const std::string_view phrase : {std::string_view("tau of"), std::string_view("value for tau")}) {
        for (std::size_t p = low.find(phrase); p != std::string::npos; p = low.find(phrase, p + 1)) {
            if (p > 0 && is_word_char(low[p - 1])) continue;
            std::size_t q = p + phrase.size();
            if (q < low.size() && is_word_char(low[q])) continue;
            for (; q < low.size(); ++q) {
                if (starts_number(low, q) && (q == 0 || !is_word_char(low[q - 1]))) {
                    if (auto lit = number_at(text.substr(q))) matches.push_back({q, *lit});
                    break;
                }
                if (sentence_ends_at(low, q)) break;
            }
        }
    }
}

}  // namespace

std::string sanitize_response(std::string_view response) {
    std::string out;
    std::size_t start = 0;
    while (start <= response.size()) {
        std::size_t end = response.find('\n', start);
        const bool last = end == std::string_view::npos;
        if (last) end = response.size();
        std::string_view line = response.substr(start, end - start);
        const std::string_view t = trim(line);
        const std::string label = lower(t);
        const bool fence = t.starts_with("```") || t.starts_with("~~~");
        const bool bare_label = label == "python" || label == "code" || label == "py";
        if (!fence && !bare_label) {
            out.append(line);
            if (!last) out.push_back('\n');
        }
        if (last) break;
        start = end + 1;
    }
    return out;
}

double extract_tau(std::string_view response) {
    const std::string clean = sanitize_response(response);
    std::vector<Match> matches;
    collect_matches(clean, matches);
    if (matches.empty()) throw ExtractionError("no tau proposal found in response");

    const auto last = std::max_element(matches.begin(), matches.end(),
                                       [](const Match& a, const Match& b) { return a.pos < b.pos; });
    const std::optional<double> value = parse_double(last->literal);
    if (!value || !std::isfinite(*value)) throw ExtractionError("proposed tau '" + last->literal + "' is not finite");
    if (!(*value > 0.0)) throw ExtractionError("proposed tau '" + last->literal + "' is not positive");
    return *value;
}

}  // namespace llmes

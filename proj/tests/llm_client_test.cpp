#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "llmes/errors.hpp"
#include "llmes/llm_client.hpp"
#include "llmes/number_format.hpp"
#include "llmes/rng.hpp"

using namespace llmes;
using nlohmann::json;

namespace {

// Golden copies of the instruction prompts.
const char* const kGoldenTune =
    "Tune the hyperparameter tau of an Evolution Stratety.\n"
    "The algorithm is a (1+1)-ES with Rechenberg rule and parameter tau.\n"
    "The objective is to maximize the fitness.\n"
    "Return the full Python code, but only change tau.";
const char* const kGoldenAnalysis =
    "Analyze the following results concerning the influence of tau on the fitness.\n"
    "Summarize your analysis in one sentence and propose a new value for tau you have not tried.";

}  // namespace

TEST(Prompts, DefaultsAreGolden) {
    const PromptPair pair;
    EXPECT_EQ(pair.tune_instruction, kGoldenTune);
    EXPECT_EQ(pair.analysis_instruction, kGoldenAnalysis);
}

TEST(Prompts, TunePrompt) {
    const std::string p = render_tune_prompt(PromptPair{});
    EXPECT_TRUE(p.starts_with("Tune the hyperparameter tau of an Evolution Stratety."));
    EXPECT_EQ(p, std::string(kGoldenTune) + "\n\nReply with the single line `tau = <value>`.");

    PromptPair custom;
    custom.tune_instruction = "Pick tau.";
    EXPECT_EQ(render_tune_prompt(custom), "Pick tau.\n\nReply with the single line `tau = <value>`.");
    custom.parse_directive = false;
    EXPECT_EQ(render_tune_prompt(custom), "Pick tau.");

    custom.tune_instruction.clear();
    EXPECT_THROW(render_tune_prompt(custom), PreconditionError);
}

TEST(Prompts, AnalysisPrompt) {
    const std::string log = "tau = 0.7, Fitness: 0.1162058339177609\ntau = 0.95, Fitness: 66.05538351053897\n";
    const std::string p = render_analysis_prompt(PromptPair{}, log);
    EXPECT_NE(p.find("tau = 0.7, Fitness: 0.1162058339177609"), std::string::npos);
    EXPECT_NE(p.find(kGoldenAnalysis), std::string::npos);
    EXPECT_EQ(p, std::string(kGoldenAnalysis) + "\n\n" + log);

    EXPECT_TRUE(render_analysis_prompt(PromptPair{}, "tau = 1, Fitness: 2").ends_with("tau = 1, Fitness: 2"));
    EXPECT_THROW(render_analysis_prompt(PromptPair{}, ""), PreconditionError);
}

TEST(Utc, FormatAndParse) {
    using namespace std::chrono;
    const UtcTime t = sys_days{year{2024} / 5 / 1} + hours{12} + minutes{3} + seconds{4} + milliseconds{250};
    EXPECT_EQ(format_utc(t), "2024-05-01T12:03:04.250Z");
    EXPECT_EQ(parse_utc(format_utc(t)), t);
    EXPECT_EQ(format_utc(UtcTime{}), "1970-01-01T00:00:00.000Z");
    EXPECT_THROW(parse_utc("2024-13-01T00:00:00.000Z"), InvalidInputError);
    EXPECT_THROW(parse_utc("yesterday"), InvalidInputError);
}

TEST(Scripted, PopsInOrderThenExhausts) {
    ScriptedBackend backend({"tau = 0.7", "tau = 0.95"});
    const auto a = backend.send("first");
    EXPECT_EQ(a.prompt, "first");
    EXPECT_EQ(a.response, "tau = 0.7");
    EXPECT_EQ(a.latency_ms, 0.0);
    EXPECT_EQ(a.timestamp, UtcTime{});
    EXPECT_EQ(backend.send("second").response, "tau = 0.95");
    EXPECT_THROW(backend.send("third"), TransportError);
}

TEST(BackendConfig, Validation) {
    LlmBackendConfig c;
    EXPECT_THROW(c.validate(), ConfigError);  // http without URL
    c.base_url = "http://localhost:8080";
    EXPECT_NO_THROW(c.validate());
    c.temperature = 2.5;
    EXPECT_THROW(c.validate(), ConfigError);
    LlmBackendConfig s;
    s.kind = BackendKind::scripted;
    EXPECT_THROW(s.validate(), ConfigError);
    s.scripted_responses = {"tau = 1"};
    EXPECT_NO_THROW(make_backend(s));
    LlmBackendConfig bad;
    bad.base_url = "localhost:8080";
    EXPECT_THROW(make_backend(bad), ConfigError);
}

TEST(ChatResponse, Parse) {
    EXPECT_EQ(parse_chat_response(R"({"choices":[{"message":{"content":"tau = 1.0"}}]})"), "tau = 1.0");
    try {
        parse_chat_response("{not json");
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.payload(), "{not json");
    }
    EXPECT_THROW(parse_chat_response(R"({"choices":[]})"), TransportError);
}

namespace {

// Local chat-completion stand-in on an ephemeral port.
class FakeServer {
public:
    explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(Http, WireFormat) {
    json seen;
    std::string auth;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"tau = 1.0"}}]})", "application/json");
    });
    LlmBackendConfig c;
    c.base_url = server.url();
    c.model = "llama3";
    c.bearer_token = "secret";
    HttpBackend backend(c);
    const LlmExchange e = backend.send("hello");
    EXPECT_EQ(e.response, "tau = 1.0");
    EXPECT_EQ(e.prompt, "hello");
    EXPECT_GE(e.latency_ms, 0.0);
    EXPECT_GT(e.timestamp.time_since_epoch().count(), 0);

    EXPECT_EQ(seen["model"], "llama3");
    EXPECT_EQ(seen["messages"], json::parse(R"([{"role":"user","content":"hello"}])"));
    EXPECT_EQ(seen["temperature"], 0.7);
    EXPECT_EQ(seen["stream"], false);
    EXPECT_EQ(auth, "Bearer secret");
}

TEST(Http, RetriesWithExponentialBackoff) {
    std::atomic<int> calls{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++calls < 3) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"tau = 0.8"}}]})", "application/json");
    });
    std::vector<long long> sleeps;
    LlmBackendConfig c;
    c.base_url = server.url();
    c.transport_retries = 2;
    HttpBackend backend(c, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    EXPECT_EQ(backend.send("p").response, "tau = 0.8");
    EXPECT_EQ(calls.load(), 3);
    EXPECT_EQ(sleeps, (std::vector<long long>{1000, 2000}));
}

TEST(Http, NonSuccessAfterRetriesCarriesPayload) {
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("model crashed", "text/plain");
    });
    LlmBackendConfig c;
    c.base_url = server.url();
    c.transport_retries = 1;
    HttpBackend backend(c, [](std::chrono::milliseconds) {});
    try {
        backend.send("p");
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.payload(), "model crashed");
        EXPECT_NE(std::string(e.what()).find("500"), std::string::npos);
    }
}

TEST(Http, MalformedBody) {
    FakeServer server([&](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
    LlmBackendConfig c;
    c.base_url = server.url();
    HttpBackend backend(c, [](std::chrono::milliseconds) {});
    EXPECT_THROW(backend.send("p"), TransportError);
}

TEST(Http, Unreachable) {
    LlmBackendConfig c;
    c.base_url = "http://127.0.0.1:1";
    c.timeout_seconds = 2;
    c.transport_retries = 2;
    int sleeps = 0;
    HttpBackend backend(c, [&](std::chrono::milliseconds) { ++sleeps; });
    EXPECT_THROW(backend.send("p"), TransportError);
    EXPECT_EQ(sleeps, 2);
}

TEST(Sanitize, StripsFencesAndLabels) {
    EXPECT_EQ(sanitize_response("```python\nx = 1\n```"), "x = 1\n");
    EXPECT_EQ(sanitize_response("python\nx = 1"), "x = 1");
    EXPECT_EQ(sanitize_response("plain text"), "plain text");
}

TEST(ExtractTau, SpecExamples) {
    EXPECT_EQ(extract_tau("tau = 0.95, Fitness: 66.05"), 0.95);
    EXPECT_EQ(extract_tau("```python\nimport random\ntau = 1.05\n```"), 1.05);
    EXPECT_EQ(extract_tau("...indicating this range is beneficial... I propose a new value tau = 0.9."), 0.9);
}

TEST(ExtractTau, Corpus) {
    std::ifstream in(std::string(LLMES_FIXTURES) + "/extract_corpus.json");
    ASSERT_TRUE(in);
    const json corpus = json::parse(in);
    for (const json& item : corpus) {
        const std::string name = item["name"];
        const std::string response = item["response"];
        if (item["expected"].is_null()) {
            EXPECT_THROW(extract_tau(response), ExtractionError) << name;
        } else {
            EXPECT_EQ(extract_tau(response), item["expected"].get<double>()) << name;
        }
    }
}

TEST(ExtractTau, NeverThrowsOtherErrorsOnArbitraryText) {
    Rng rng(7);
    const std::string alphabet = "tau =.0123456789eE+-\n`python code ,;!?of value for";
    for (int i = 0; i < 3000; ++i) {
        std::string text;
        const auto len = rng.next_u64() % 60;
        for (std::uint64_t k = 0; k < len; ++k) text += alphabet[rng.next_u64() % alphabet.size()];
        try {
            const double v = extract_tau(text);
            EXPECT_GT(v, 0.0) << text;
            EXPECT_TRUE(std::isfinite(v)) << text;
            EXPECT_EQ(extract_tau(text), v);
        } catch (const ExtractionError&) {
        }
    }
}

TEST(ExtractTau, RoundTripsShortestRepr) {
    Rng rng(8);
    for (int i = 0; i < 5000; ++i) {
        const double v = std::exp(rng.uniform(-30, 30));
        EXPECT_EQ(extract_tau("tau = " + shortest_repr(v)), v) << shortest_repr(v);
    }
}

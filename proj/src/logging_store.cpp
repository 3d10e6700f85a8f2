#include "llmes/logging_store.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "llmes/errors.hpp"
#include "llmes/number_format.hpp"

namespace llmes {

using nlohmann::json;

ScoreStats trial_stats(std::span<const double> scores) {
    if (scores.empty()) throw InvalidInputError("trial_stats: no scores");
    double sum = 0.0;
    for (const double s : scores) sum += s;
    const double mean = sum / static_cast<double>(scores.size());
    if (scores.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (const double s : scores) ss += (s - mean) * (s - mean);
    return {mean, std::sqrt(ss / static_cast<double>(scores.size() - 1))};
}

std::string format_log_line(const Trial& trial, bool with_std) {
    std::string line = "tau = " + shortest_repr(trial.tau) + ", Fitness: " + shortest_repr(trial.mean_score);
    if (with_std) line += ", Std: " + shortest_repr(trial.std_score);
    return line;
}

std::string append_log_line(const Trial& trial, std::string log, bool with_std) {
    log += format_log_line(trial, with_std);
    log += '\n';
    return log;
}

std::string render_log(const TuningSession& session) {
    std::string log;
    for (const Trial& t : session.trials) log = append_log_line(t, std::move(log), session.config.log_std);
    return log;
}

namespace {

const std::set<std::string> kHeaderKeys{"type", "schema_version", "config"};
const std::set<std::string> kExchangeKeys{"type", "proposal", "attempt", "prompt", "response",
                                          "latency_ms", "timestamp", "error"};
const std::set<std::string> kTrialKeys{"type", "index", "tau", "mean", "std", "runs"};
const std::set<std::string> kStatusKeys{"type", "status", "best_tau", "error"};

json merged(json record, const json& extra) {
    if (extra.is_object())
        for (const auto& [k, v] : extra.items())
            if (!record.contains(k)) record[k] = v;
    return record;
}

json unknown_keys(const json& record, const std::set<std::string>& known) {
    json extra = json::object();
    for (const auto& [k, v] : record.items())
        if (!known.contains(k)) extra[k] = v;
    return extra;
}

json config_json(const SessionConfig& c) {
    return json{
        {"objective", {{"name", c.objective.name}, {"dimension", c.objective.dimension}}},
        {"es",
         {{"sigma0", c.es_template.sigma0},
          {"max_generations", c.es_template.max_generations},
          {"init_low", c.es_template.init_low},
          {"init_high", c.es_template.init_high}}},
        {"replicates", c.replicates},
        {"budget", c.budget},
        {"master_seed", c.master_seed},
        {"duplicate_tolerance", c.duplicate_tolerance},
        {"max_propose_retries", c.max_propose_retries},
        {"log_std", c.log_std},
        {"prompts",
         {{"tune", c.prompts.tune_instruction},
          {"analysis", c.prompts.analysis_instruction},
          {"parse_directive", c.prompts.parse_directive}}},
    };
}

SessionConfig config_from_json(const json& j) {
    SessionConfig c;
    const json& obj = j.at("objective");
    c.objective.name = obj.at("name").get<std::string>();
    c.objective.dimension = obj.at("dimension").get<std::size_t>();
    const json& es = j.at("es");
    c.es_template.sigma0 = es.at("sigma0").get<double>();
    c.es_template.max_generations = es.at("max_generations").get<std::size_t>();
    c.es_template.init_low = es.at("init_low").get<double>();
    c.es_template.init_high = es.at("init_high").get<double>();
    c.replicates = j.at("replicates").get<std::size_t>();
    c.budget = j.at("budget").get<std::size_t>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.duplicate_tolerance = j.at("duplicate_tolerance").get<double>();
    c.max_propose_retries = j.at("max_propose_retries").get<std::size_t>();
    c.log_std = j.at("log_std").get<bool>();
    const json& p = j.at("prompts");
    c.prompts.tune_instruction = p.at("tune").get<std::string>();
    c.prompts.analysis_instruction = p.at("analysis").get<std::string>();
    c.prompts.parse_directive = p.at("parse_directive").get<bool>();
    return c;
}

LlmExchange exchange_from_json(const json& j) {
    LlmExchange e;
    e.proposal = j.at("proposal").get<std::size_t>();
    e.attempt = j.at("attempt").get<std::size_t>();
    e.prompt = j.at("prompt").get<std::string>();
    e.response = j.at("response").get<std::string>();
    e.latency_ms = j.at("latency_ms").get<double>();
    e.timestamp = parse_utc(j.at("timestamp").get<std::string>());
    if (j.contains("error")) e.error = j.at("error").get<std::string>();
    return e;
}

Trial trial_from_json(const json& j) {
    Trial t;
    t.tau = j.at("tau").get<double>();
    t.mean_score = j.at("mean").get<double>();
    t.std_score = j.at("std").get<double>();
    for (const json& r : j.at("runs")) {
        EsRunResult run;
        run.seed = r.at("seed").get<std::uint64_t>();
        run.best_f = r.at("best_f").get<double>();
        run.score = r.at("score").get<double>();
        run.final_sigma = r.at("final_sigma").get<double>();
        run.generations_run = r.at("generations").get<std::size_t>();
        t.results.push_back(run);
    }
    return t;
}

SessionStatus status_from_string(const std::string& s) {
    if (s == "running") return SessionStatus::running;
    if (s == "completed") return SessionStatus::completed;
    if (s == "aborted") return SessionStatus::aborted;
    throw InvalidInputError("unknown status '" + s + "'");
}

// Applies one record to `session`. Throws on malformed content.
void apply_record(TuningSession& session, const json& record, std::size_t line_no, bool& saw_status) {
    if (!record.is_object()) throw SessionFormatError(line_no, "record is not a JSON object");
    const std::string type = record.value("type", "");
    if (saw_status) throw SessionFormatError(line_no, "record after final status");

    if (type == "exchange") {
        const std::size_t index = session.exchanges.size();
        session.exchanges.push_back(exchange_from_json(record));
        json extra = unknown_keys(record, kExchangeKeys);
        if (!extra.empty()) session.exchange_extra[index] = std::move(extra);
    } else if (type == "trial") {
        const std::size_t index = record.at("index").get<std::size_t>();
        if (index != session.trials.size())
            throw SessionFormatError(line_no, "trial index " + std::to_string(index) + " out of order");
        session.trials.push_back(trial_from_json(record));
        json extra = unknown_keys(record, kTrialKeys);
        if (!extra.empty()) session.trial_extra[index] = std::move(extra);
    } else if (type == "status") {
        session.status = status_from_string(record.at("status").get<std::string>());
        if (record.contains("best_tau") && !record.at("best_tau").is_null())
            session.best_tau = record.at("best_tau").get<double>();
        session.error = record.value("error", "");
        session.status_extra = unknown_keys(record, kStatusKeys);
        saw_status = true;
    } else if (type == "header") {
        throw SessionFormatError(line_no, "duplicate header");
    } else {
        session.unknown_records.push_back(record);
    }
}

struct ParseOutcome {
    TuningSession session;
    std::optional<SessionFormatError> error;
};

ParseOutcome parse_lines(std::string_view text, bool strict) {
    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start < text.size();) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw EmptySessionError("session file is empty");

    ParseOutcome out;
    const json header = json::parse(lines.front(), nullptr, false);
    if (header.is_discarded() || !header.is_object() || header.value("type", "") != "header")
        throw SessionFormatError(1, "first record must be a header");
    if (!header.contains("schema_version") || !header.at("schema_version").is_number_integer())
        throw SessionFormatError(1, "header lacks an integer schema_version");
    const auto version = header.at("schema_version").get<long long>();
    if (version != kSchemaVersion)
        throw VersionError("session schema_version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kSchemaVersion) + ")");
    try {
        out.session.config = config_from_json(header.at("config"));
    } catch (const std::exception& e) {
        throw SessionFormatError(1, std::string("bad config: ") + e.what());
    }
    out.session.header_extra = unknown_keys(header, kHeaderKeys);

    bool saw_status = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        try {
            const json record = json::parse(lines[i], nullptr, false);
            if (record.is_discarded()) throw SessionFormatError(line_no, "malformed JSON");
            TuningSession staged = out.session;
            apply_record(staged, record, line_no, saw_status);
            out.session = std::move(staged);
        } catch (const SessionFormatError& e) {
            if (strict) throw;
            out.error = e;
            return out;
        } catch (const std::exception& e) {
            SessionFormatError err(line_no, e.what());
            if (strict) throw err;
            out.error = err;
            return out;
        }
    }
    return out;
}

}  // namespace

json header_record(const TuningSession& session) {
    return merged(json{{"type", "header"}, {"schema_version", kSchemaVersion}, {"config", config_json(session.config)}},
                  session.header_extra);
}

json exchange_record(const LlmExchange& e, const json& extra) {
    json j{{"type", "exchange"},        {"proposal", e.proposal},   {"attempt", e.attempt},
           {"prompt", e.prompt},        {"response", e.response},   {"latency_ms", e.latency_ms},
           {"timestamp", format_utc(e.timestamp)}};
    if (!e.error.empty()) j["error"] = e.error;
    return merged(std::move(j), extra);
}

json trial_record(const Trial& t, std::size_t index, const json& extra) {
    json runs = json::array();
    for (const EsRunResult& r : t.results)
        runs.push_back(json{{"seed", r.seed},
                            {"best_f", r.best_f},
                            {"score", r.score},
                            {"final_sigma", r.final_sigma},
                            {"generations", r.generations_run}});
    return merged(json{{"type", "trial"},
                       {"index", index},
                       {"tau", t.tau},
                       {"mean", t.mean_score},
                       {"std", t.std_score},
                       {"runs", std::move(runs)}},
                  extra);
}

json status_record(const TuningSession& session) {
    json j{{"type", "status"}, {"status", to_string(session.status)}};
    j["best_tau"] = session.best_tau ? json(*session.best_tau) : json(nullptr);
    j["error"] = session.error;
    return merged(std::move(j), session.status_extra);
}

std::string serialize_session(const TuningSession& session) {
    auto extra_of = [](const std::map<std::size_t, json>& m, std::size_t i) {
        const auto it = m.find(i);
        return it == m.end() ? json::object() : it->second;
    };
    std::string out = header_record(session).dump() + '\n';
    std::size_t next_exchange = 0;
    for (std::size_t k = 0; k < session.trials.size(); ++k) {
        while (next_exchange < session.exchanges.size() && session.exchanges[next_exchange].proposal <= k) {
            out += exchange_record(session.exchanges[next_exchange], extra_of(session.exchange_extra, next_exchange)).dump() + '\n';
            ++next_exchange;
        }
        out += trial_record(session.trials[k], k, extra_of(session.trial_extra, k)).dump() + '\n';
    }
    for (; next_exchange < session.exchanges.size(); ++next_exchange)
        out += exchange_record(session.exchanges[next_exchange], extra_of(session.exchange_extra, next_exchange)).dump() + '\n';
    for (const json& r : session.unknown_records) out += r.dump() + '\n';
    if (session.status != SessionStatus::running) out += status_record(session).dump() + '\n';
    return out;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void write_session(const TuningSession& session, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << serialize_session(session);
    if (!out) throw Error("write failed: " + path.string());
}

TuningSession parse_session(std::string_view text) {
    return parse_lines(text, true).session;
}

TuningSession read_session(const std::filesystem::path& path) {
    return parse_session(slurp(path));
}

PartialSession read_session_partial(const std::filesystem::path& path) {
    ParseOutcome outcome = parse_lines(slurp(path), false);
    PartialSession partial{std::move(outcome.session), std::nullopt, 0};
    if (outcome.error) {
        partial.error = outcome.error->what();
        partial.error_line = outcome.error->line();
    }
    return partial;
}

SessionWriter::SessionWriter(std::filesystem::path session_path, std::filesystem::path log_path)
    : session_path_(std::move(session_path)), log_path_(std::move(log_path)) {}

void SessionWriter::write_line(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw Error("write failed: " + session_path_.string());
}

void SessionWriter::begin(const TuningSession& session) {
    out_ = std::ofstream(session_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write " + session_path_.string());
    write_line(header_record(session));
    std::ofstream log(log_path_, std::ios::binary | std::ios::trunc);
    if (!log) throw Error("cannot write " + log_path_.string());
}

void SessionWriter::exchange(const LlmExchange& exchange) {
    write_line(exchange_record(exchange));
}

void SessionWriter::trial(const TuningSession& session) {
    const std::size_t index = session.trials.size() - 1;
    const Trial& t = session.trials.back();
    write_line(trial_record(t, index));
    std::ofstream log(log_path_, std::ios::binary | std::ios::app);
    log << format_log_line(t, session.config.log_std) << '\n';
    if (!log) throw Error("write failed: " + log_path_.string());
}

void SessionWriter::finish(const TuningSession& session) {
    write_line(status_record(session));
}

}  // namespace llmes

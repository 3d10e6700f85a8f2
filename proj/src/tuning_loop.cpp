#include "llmes/tuning_loop.hpp"

#include <cmath>
#include <string>

#include "llmes/errors.hpp"
#include "llmes/logging_store.hpp"
#include "llmes/number_format.hpp"
#include "llmes/rng.hpp"

namespace llmes {

const char* to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::running: return "running";
        case SessionStatus::completed: return "completed";
        case SessionStatus::aborted: return "aborted";
    }
    return "unknown";
}

void SessionConfig::validate() const {
    if (budget < 1) throw ConfigError("budget must be at least 1");
    if (replicates < 1) throw ConfigError("replicates must be at least 1");
    if (!(duplicate_tolerance > 0.0)) throw ConfigError("duplicate tolerance must be positive");
    if (objective.dimension < 1) throw ConfigError("dimension must be at least 1");
    resolve_objective(objective.name);
    es_config(1.0, 0).validate();
}

EsConfig SessionConfig::es_config(double tau, std::uint64_t seed) const {
    EsConfig c;
    c.tau = tau;
    c.sigma0 = es_template.sigma0;
    c.dimension = objective.dimension;
    c.max_generations = es_template.max_generations;
    c.init_low = es_template.init_low;
    c.init_high = es_template.init_high;
    c.seed = seed;
    return c;
}

Trial run_trial(double tau, const SessionConfig& cfg, std::size_t trial_index) {
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    Trial trial;
    trial.tau = tau;
    trial.results.reserve(cfg.replicates);
    std::vector<double> scores;
    scores.reserve(cfg.replicates);
    for (std::size_t i = 0; i < cfg.replicates; ++i) {
        const auto seed = replicate_seed(cfg.master_seed, trial_index, i);
        trial.results.push_back(run_es(cfg.es_config(tau, seed), cfg.objective));
        scores.push_back(trial.results.back().score);
    }
    const ScoreStats stats = trial_stats(scores);
    trial.mean_score = stats.mean;
    trial.std_score = stats.std;
    return trial;
}

bool is_duplicate(double tau, const TuningSession& session, double tol) {
    for (const Trial& t : session.trials)
        if (std::abs(tau - t.tau) <= tol) return true;
    return false;
}

const Trial& best_trial(const TuningSession& session) {
    if (session.trials.empty()) throw EmptySessionError("session has no trials");
    const Trial* best = &session.trials.front();
    for (const Trial& t : session.trials) {
        if (t.mean_score > best->mean_score || (t.mean_score == best->mean_score && t.tau < best->tau)) best = &t;
    }
    return *best;
}

namespace {

LlmExchange call_backend(TuningSession& session, LlmBackend& backend, const std::string& prompt,
                         std::size_t attempt) {
    const std::size_t proposal = session.trials.size();
    try {
        LlmExchange exchange = backend.send(prompt);
        exchange.attempt = attempt;
        exchange.proposal = proposal;
        session.exchanges.push_back(exchange);
        return exchange;
    } catch (const TransportError& e) {
        LlmExchange failed;
        failed.prompt = prompt;
        failed.response = e.payload();
        failed.attempt = attempt;
        failed.proposal = proposal;
        failed.error = e.what();
        session.exchanges.push_back(std::move(failed));
        throw;
    }
}

}  // namespace

double propose_next_tau(TuningSession& session, LlmBackend& backend) {
    if (session.status != SessionStatus::running) throw PreconditionError("session is not running");
    const SessionConfig& cfg = session.config;
    const std::string log = render_log(session);
    const std::string base = log.empty() ? render_tune_prompt(cfg.prompts) : render_analysis_prompt(cfg.prompts, log);

    std::string prompt = base;
    std::optional<double> last_duplicate;
    std::string last_failure;
    for (std::size_t attempt = 0; attempt <= cfg.max_propose_retries; ++attempt) {
        const LlmExchange exchange = call_backend(session, backend, prompt, attempt);
        try {
            const double tau = extract_tau(exchange.response);
            if (!is_duplicate(tau, session, cfg.duplicate_tolerance)) return tau;
            last_duplicate = tau;
            prompt = base + "\n\n" + std::string(kDuplicateReminder);
        } catch (const ExtractionError& e) {
            last_failure = e.what();
            prompt = base + "\n\n" + std::string(kParseDirective);
        }
    }

    if (last_duplicate) {
        double tau = *last_duplicate;
        // Rounded so 0.95 * 1.05 is logged as 0.9975.
        while (is_duplicate(tau, session, cfg.duplicate_tolerance)) tau = *parse_double(fixed_repr(tau * kFallbackFactor, 12));
        return tau;
    }
    throw ExtractionError("no usable tau after " + std::to_string(cfg.max_propose_retries + 1) +
                          " attempts: " + last_failure);
}

TuningSession run_session(const SessionConfig& cfg, LlmBackend& backend, const std::optional<SessionOutput>& output) {
    cfg.validate();
    TuningSession session;
    session.config = cfg;

    std::optional<SessionWriter> writer;
    if (output) {
        writer.emplace(output->session_file, output->log_file);
        writer->begin(session);
    }

    try {
        while (session.trials.size() < cfg.budget) {
            const std::size_t before = session.exchanges.size();
            double tau = 0.0;
            try {
                tau = propose_next_tau(session, backend);
            } catch (...) {
                if (writer)
                    for (std::size_t i = before; i < session.exchanges.size(); ++i) writer->exchange(session.exchanges[i]);
                throw;
            }
            if (writer)
                for (std::size_t i = before; i < session.exchanges.size(); ++i) writer->exchange(session.exchanges[i]);

            session.trials.push_back(run_trial(tau, cfg, session.trials.size()));
            if (writer) writer->trial(session);
        }
        session.status = SessionStatus::completed;
    } catch (const Error& e) {
        session.status = SessionStatus::aborted;
        session.error = e.what();
    }

    if (!session.trials.empty()) session.best_tau = best_trial(session).tau;
    if (writer) writer->finish(session);
    return session;
}

}  // namespace llmes

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmes/es_core.hpp"
#include "llmes/llm_client.hpp"

namespace llmes {

// ES settings shared by every trial; tau and seed vary per run.
struct EsTemplate {
    double sigma0 = 1.0;
    std::size_t max_generations = 1000;
    double init_low = -5.0;
    double init_high = 5.0;

    bool operator==(const EsTemplate&) const = default;
};

struct SessionConfig {
    ObjectiveSpec objective;
    EsTemplate es_template;
    std::size_t replicates = 10;
    std::size_t budget = 12;
    std::uint64_t master_seed = 1;
    double duplicate_tolerance = 1e-9;
    std::size_t max_propose_retries = 2;
    bool log_std = true;
    PromptPair prompts;

    void validate() const;
    EsConfig es_config(double tau, std::uint64_t seed) const;

    bool operator==(const SessionConfig&) const = default;
};

struct Trial {
    double tau = 0.0;
    std::vector<EsRunResult> results;
    double mean_score = 0.0;
    double std_score = 0.0;

    bool operator==(const Trial&) const = default;
};

enum class SessionStatus { running, completed, aborted };

const char* to_string(SessionStatus status);

struct TuningSession {
    SessionConfig config;
    std::vector<Trial> trials;
    std::vector<LlmExchange> exchanges;
    SessionStatus status = SessionStatus::running;
    std::optional<double> best_tau;
    std::string error;  // diagnostics when aborted

    // Keys this version does not understand, kept so rewrites preserve them.
    nlohmann::json header_extra = nlohmann::json::object();
    std::map<std::size_t, nlohmann::json> trial_extra;     // by trial index
    std::map<std::size_t, nlohmann::json> exchange_extra;  // by exchange index
    nlohmann::json status_extra = nlohmann::json::object();
    std::vector<nlohmann::json> unknown_records;

    bool operator==(const TuningSession&) const = default;
};

}  // namespace llmes

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "llmes/llm_client.hpp"
#include "llmes/session.hpp"

namespace llmes {

inline constexpr std::string_view kDuplicateReminder =
    "That value was already tried; propose a different one.";

// Multiplier applied to a duplicate proposal once re-prompting is exhausted.
inline constexpr double kFallbackFactor = 1.05;

// Runs cfg.replicates seeded ES runs at tau. Replicate i of trial
// `trial_index` uses replicate_seed(master_seed, trial_index, i).
Trial run_trial(double tau, const SessionConfig& cfg, std::size_t trial_index);

bool is_duplicate(double tau, const TuningSession& session, double tol);

// Trial with the largest mean score, smallest tau on ties.
// Throws EmptySessionError when there are no trials.
const Trial& best_trial(const TuningSession& session);

// Asks the backend for the next tau and appends every call to
// session.exchanges. Throws TransportError or ExtractionError when no tau can
// be obtained.
double propose_next_tau(TuningSession& session, LlmBackend& backend);

struct SessionOutput {
    std::filesystem::path session_file;
    std::filesystem::path log_file;
};

// Full propose -> run -> log loop for cfg.budget trials. When `output` is
// set, the session and log files are updated after every step, so an abort
// leaves a readable partial session on disk.
TuningSession run_session(const SessionConfig& cfg, LlmBackend& backend,
                          const std::optional<SessionOutput>& output = std::nullopt);

}  // namespace llmes

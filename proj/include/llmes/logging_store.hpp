#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "llmes/session.hpp"

namespace llmes {

inline constexpr int kSchemaVersion = 1;

struct ScoreStats {
    double mean = 0.0;
    double std = 0.0;
};

// Arithmetic mean and sample standard deviation (n - 1 denominator, 0 for a
// single score). Throws InvalidInputError on an empty list.
ScoreStats trial_stats(std::span<const double> scores);

// "tau = <tau>, Fitness: <mean>[, Std: <std>]" without newline.
std::string format_log_line(const Trial& trial, bool with_std);

// log + format_log_line(trial) + "\n".
std::string append_log_line(const Trial& trial, std::string log, bool with_std = true);

// Paper-format log of every trial in order.
std::string render_log(const TuningSession& session);

// Session file: one JSON object per line, each with a "type" field.
//
//   header    schema_version, config            (first line)
//   exchange  one backend call
//   trial     tau, replicate seeds and results, mean, std
//   status    final status, best_tau, error     (last line, absent while running)
//
// Exchanges that fed trial k are written just before trial k.
nlohmann::json header_record(const TuningSession& session);
nlohmann::json exchange_record(const LlmExchange& exchange, const nlohmann::json& extra = {});
nlohmann::json trial_record(const Trial& trial, std::size_t index, const nlohmann::json& extra = {});
nlohmann::json status_record(const TuningSession& session);

std::string serialize_session(const TuningSession& session);
void write_session(const TuningSession& session, const std::filesystem::path& path);

// Strict reader. Throws EmptySessionError, VersionError or SessionFormatError.
TuningSession parse_session(std::string_view text);
TuningSession read_session(const std::filesystem::path& path);

struct PartialSession {
    TuningSession session;          // every record before the first bad line
    std::optional<std::string> error;
    std::size_t error_line = 0;
};

// Keeps whatever precedes the first malformed line. Empty input and version
// mismatches still throw.
PartialSession read_session_partial(const std::filesystem::path& path);

// Appends records to a session file as a run progresses.
class SessionWriter {
public:
    SessionWriter(std::filesystem::path session_path, std::filesystem::path log_path);

    void begin(const TuningSession& session);
    void exchange(const LlmExchange& exchange);
    void trial(const TuningSession& session);
    void finish(const TuningSession& session);

private:
    void write_line(const nlohmann::json& record);

    std::filesystem::path session_path_;
    std::filesystem::path log_path_;
    std::ofstream out_;
};

}  // namespace llmes

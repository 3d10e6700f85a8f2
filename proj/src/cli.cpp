#include "llmes/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "llmes/errors.hpp"
#include "llmes/logging_store.hpp"
#include "llmes/number_format.hpp"
#include "llmes/report.hpp"
#include "llmes/tuning_loop.hpp"

namespace llmes {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

constexpr const char* kPrecedenceNote =
    "Settings resolve as: command-line flags > environment (LLMES_ENDPOINT, LLMES_MODEL) > "
    "--config JSON file > built-in defaults. A bearer token is read from LLMES_API_KEY only.";

struct UsageError : Error {
    using Error::Error;
};

// Values shared by every subcommand.
struct EsFlags {
    std::string function = "sphere";
    std::size_t dim = 5;
    std::size_t generations = 1000;
    std::size_t replicates = 10;
    double sigma0 = 1.0;
    double init_low = -5.0;
    double init_high = 5.0;
    std::uint64_t seed = 1;
    bool no_std = false;
    std::string out = "llmes";
    std::string config_file;
};

struct TuneFlags {
    std::size_t budget = 12;
    std::string backend = "http";
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string model = "llama3";
    double temperature = 0.7;
    double timeout = 60.0;
    std::size_t retries = 2;
    std::size_t max_propose_retries = 2;
    std::vector<std::string> responses;
    std::string script_file;
};

void add_es_flags(CLI::App& cmd, EsFlags& f) {
    cmd.add_option("--function", f.function, "Objective function")->capture_default_str();
    cmd.add_option("--dim", f.dim, "Problem dimension")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--generations", f.generations, "Generations per ES run")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--replicates", f.replicates, "ES runs per tau")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--sigma0", f.sigma0, "Initial step size")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--init-low", f.init_low, "Lower bound of the initialization box")->capture_default_str();
    cmd.add_option("--init-high", f.init_high, "Upper bound of the initialization box")->capture_default_str();
    cmd.add_option("--seed", f.seed, "Master seed")->capture_default_str();
    cmd.add_flag("--no-std", f.no_std, "Omit the Std column from log lines");
    cmd.add_option("--out", f.out, "Output path prefix")->capture_default_str();
    cmd.add_option("--config", f.config_file, "JSON file with default settings");
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw UsageError("config file " + path + " is not a JSON object");
    return j;
}

// Fills `value` from the environment or the config file when the flag was not given.
template <typename T>
void resolve(const CLI::App& cmd, const char* flag, T& value, const json& file, const char* key,
             const char* env = nullptr) {
    if (cmd.count(flag) > 0) return;
    if (env != nullptr) {
        if (const char* v = std::getenv(env); v != nullptr && *v != '\0') {
            if constexpr (std::is_same_v<T, std::string>) {
                value = v;
                return;
            }
        }
    }
    if (file.contains(key)) {
        try {
            value = file.at(key).get<T>();
        } catch (const json::exception&) {
            throw UsageError(std::string("config file key '") + key + "' has the wrong type");
        }
    }
}

SessionConfig session_config(const CLI::App& cmd, EsFlags& f, const json& file) {
    resolve(cmd, "--function", f.function, file, "function");
    resolve(cmd, "--dim", f.dim, file, "dim");
    resolve(cmd, "--generations", f.generations, file, "generations");
    resolve(cmd, "--replicates", f.replicates, file, "replicates");
    resolve(cmd, "--sigma0", f.sigma0, file, "sigma0");
    resolve(cmd, "--init-low", f.init_low, file, "init_low");
    resolve(cmd, "--init-high", f.init_high, file, "init_high");
    resolve(cmd, "--seed", f.seed, file, "seed");

    SessionConfig cfg;
    cfg.objective = {f.function, f.dim};
    cfg.es_template = {f.sigma0, f.generations, f.init_low, f.init_high};
    cfg.replicates = f.replicates;
    cfg.master_seed = f.seed;
    cfg.log_std = !f.no_std;
    cfg.validate();
    return cfg;
}

std::vector<std::string> load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read script file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw UsageError("script file " + path + " must be a JSON array of strings");
    std::vector<std::string> out;
    for (const json& item : j) {
        if (!item.is_string()) throw UsageError("script file " + path + " must be a JSON array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

LlmBackendConfig backend_config(const CLI::App& cmd, TuneFlags& t, const json& file) {
    resolve(cmd, "--backend", t.backend, file, "backend");
    resolve(cmd, "--endpoint", t.endpoint, file, "endpoint", "LLMES_ENDPOINT");
    resolve(cmd, "--path", t.path, file, "path");
    resolve(cmd, "--model", t.model, file, "model", "LLMES_MODEL");
    resolve(cmd, "--temperature", t.temperature, file, "temperature");
    resolve(cmd, "--timeout", t.timeout, file, "timeout");
    resolve(cmd, "--retries", t.retries, file, "retries");

    LlmBackendConfig b;
    if (t.backend == "http") {
        b.kind = BackendKind::http;
    } else if (t.backend == "scripted") {
        b.kind = BackendKind::scripted;
    } else {
        throw UsageError("unknown backend '" + t.backend + "' (valid: http, scripted)");
    }
    b.base_url = t.endpoint;
    b.path = t.path;
    b.model = t.model;
    b.temperature = t.temperature;
    b.timeout_seconds = t.timeout;
    b.transport_retries = t.retries;
    if (const char* token = std::getenv("LLMES_API_KEY")) b.bearer_token = token;
    b.scripted_responses = t.responses;
    if (!t.script_file.empty()) {
        const auto more = load_script(t.script_file);
        b.scripted_responses.insert(b.scripted_responses.end(), more.begin(), more.end());
    }
    b.validate();
    return b;
}

void write_reports(const std::vector<Trial>& trials, std::optional<double> best_tau, const std::string& out) {
    if (trials.empty()) return;
    emit_csv(trials, out + ".csv");
    if (trials.size() >= 2) emit_plot(trials, best_tau, out + ".svg");
}

std::string summary(const Trial& best) {
    return "best tau = " + shortest_repr(best.tau) + " (mean fitness " + shortest_repr(best.mean_score) + ")";
}

int cmd_tune(const CLI::App& cmd, EsFlags& f, TuneFlags& t, std::ostream& out, std::ostream& err) {
    const json file = load_config_file(f.config_file);
    SessionConfig cfg = session_config(cmd, f, file);
    resolve(cmd, "--budget", t.budget, file, "budget");
    resolve(cmd, "--max-propose-retries", t.max_propose_retries, file, "max_propose_retries");
    cfg.budget = t.budget;
    cfg.max_propose_retries = t.max_propose_retries;
    cfg.validate();
    auto backend = make_backend(backend_config(cmd, t, file));

    const SessionOutput files{f.out + ".session.jsonl", f.out + ".log"};
    const TuningSession session = run_session(cfg, *backend, files);
    write_reports(session.trials, session.best_tau, f.out);

    if (session.status != SessionStatus::completed) {
        err << "error: session aborted after " << session.trials.size() << " trial(s): " << session.error << '\n';
        err << "partial session written to " << files.session_file.string() << '\n';
        return kExitRuntime;
    }
    out << summary(best_trial(session)) << '\n';
    return kExitOk;
}

int cmd_grid(const CLI::App& cmd, EsFlags& f, GridSpec& grid, std::ostream& out) {
    const json file = load_config_file(f.config_file);
    const SessionConfig cfg = session_config(cmd, f, file);
    const std::vector<Trial> trials = run_grid(grid, cfg);

    TuningSession session;
    session.config = cfg;
    session.trials = trials;
    session.best_tau = best_trial(session).tau;

    std::ofstream log(f.out + ".log", std::ios::binary | std::ios::trunc);
    log << render_log(session);
    if (!log) throw Error("cannot write " + f.out + ".log");
    write_reports(trials, session.best_tau, f.out);
    out << summary(best_trial(session)) << '\n';
    return kExitOk;
}

int cmd_run_es(const CLI::App& cmd, EsFlags& f, double tau, std::ostream& out) {
    const json file = load_config_file(f.config_file);
    const SessionConfig cfg = session_config(cmd, f, file);
    const Trial trial = run_trial(tau, cfg, 0);
    out << format_log_line(trial, cfg.log_std) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tune the one-fifth-rule parameter tau of a (1+1)-ES with an LLM in the loop", "llmes"};
    app.footer(kPrecedenceNote);
    app.require_subcommand(1);

    EsFlags tune_es, grid_es, run_es_flags;
    TuneFlags tune;
    GridSpec grid;
    double tau = 0.0;

    CLI::App* tune_cmd = app.add_subcommand("tune", "Run the LLM feedback loop");
    add_es_flags(*tune_cmd, tune_es);
    tune_cmd->add_option("--budget", tune.budget, "Number of trials")->capture_default_str()->check(CLI::PositiveNumber);
    tune_cmd->add_option("--backend", tune.backend, "LLM backend: http or scripted")->capture_default_str();
    tune_cmd->add_option("--endpoint", tune.endpoint, "Base URL of the chat-completion server");
    tune_cmd->add_option("--path", tune.path, "Request path")->capture_default_str();
    tune_cmd->add_option("--model", tune.model, "Model name")->capture_default_str();
    tune_cmd->add_option("--temperature", tune.temperature, "Sampling temperature")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 2.0));
    tune_cmd->add_option("--timeout", tune.timeout, "Request timeout in seconds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    tune_cmd->add_option("--retries", tune.retries, "Transport retries per request")->capture_default_str();
    tune_cmd->add_option("--max-propose-retries", tune.max_propose_retries, "Re-prompts per proposal")
        ->capture_default_str();
    tune_cmd->add_option("--response", tune.responses, "Scripted backend response (repeatable)");
    tune_cmd->add_option("--script", tune.script_file, "JSON array of scripted responses");

    CLI::App* grid_cmd = app.add_subcommand("grid", "Evaluate an evenly spaced tau grid without an LLM");
    add_es_flags(*grid_cmd, grid_es);
    grid_cmd->add_option("--tau-min", grid.tau_min, "Smallest tau")->capture_default_str()->check(CLI::PositiveNumber);
    grid_cmd->add_option("--tau-max", grid.tau_max, "Largest tau")->capture_default_str()->check(CLI::PositiveNumber);
    grid_cmd->add_option("--steps", grid.steps, "Number of grid points")->capture_default_str();

    CLI::App* run_cmd = app.add_subcommand("run-es", "Run one trial at a fixed tau and print its log line");
    add_es_flags(*run_cmd, run_es_flags);
    run_cmd->add_option("--tau", tau, "Adaptation rate")->required()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help(e.get_name().empty() ? "" : e.get_name());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        app.exit(e, out, msg);
        err << msg.str();
        return kExitUsage;
    }

    try {
        if (tune_cmd->parsed()) return cmd_tune(*tune_cmd, tune_es, tune, out, err);
        if (grid_cmd->parsed()) {
            grid.validate();
            return cmd_grid(*grid_cmd, grid_es, grid, out);
        }
        return cmd_run_es(*run_cmd, run_es_flags, tau, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace llmes

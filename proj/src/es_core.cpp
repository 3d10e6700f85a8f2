#include "llmes/es_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "llmes/errors.hpp"

namespace llmes {

namespace {

const std::map<std::string, ObjectiveFn>& registry() {
    static const std::map<std::string, ObjectiveFn> objectives{
        {"sphere", [](std::span<const double> x) { return sphere_eval(x); }},
    };
    return objectives;
}

}  // namespace

std::vector<std::string> objective_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

ObjectiveFn resolve_objective(const std::string& name) {
    const auto it = registry().find(name);
    if (it == registry().end()) {
        std::string valid;
        for (const auto& n : objective_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw ConfigError("unknown function '" + name + "' (valid: " + valid + ")");
    }
    return it->second;
}

void EsConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive and finite");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw ConfigError("sigma0 must be positive and finite");
    if (dimension < 1) throw ConfigError("dimension must be at least 1");
    if (max_generations < 1) throw ConfigError("max_generations must be at least 1");
    if (!std::isfinite(init_low) || !std::isfinite(init_high) || !(init_low < init_high))
        throw ConfigError("init_low must be below init_high");
}

double sphere_eval(std::span<const double> x) {
    if (x.empty()) throw InvalidInputError("sphere_eval: empty vector");
    double sum = 0.0;
    for (const double xi : x) {
        if (!std::isfinite(xi)) throw InvalidInputError("sphere_eval: non-finite coordinate");
        sum += xi * xi;
    }
    return sum;
}

SolutionVector mutate(std::span<const double> x, double sigma, Rng& rng) {
    SolutionVector out(x.begin(), x.end());
    for (double& xi : out) xi += sigma * rng.standard_normal();
    return out;
}

double update_sigma(double sigma, double tau, bool success) {
    const double indicator = success ? 1.0 : 0.0;
    return sigma * std::exp(tau * (indicator - 0.2));
}

double score_of(double f_value) {
    if (!(f_value >= 0.0)) throw InvalidInputError("score_of: objective value must be non-negative");
    // + 0.0 turns -0.0 (f == 1) into 0.0
    return -std::log(std::max(f_value, kScoreFloor)) + 0.0;
}

EsRunResult run_es(const EsConfig& config, const ObjectiveSpec& objective,
                   const std::function<void(const GenerationTrace&)>& observer) {
    config.validate();
    if (objective.dimension != config.dimension)
        throw ConfigError("objective dimension " + std::to_string(objective.dimension) +
                          " does not match configured dimension " + std::to_string(config.dimension));
    const ObjectiveFn f = resolve_objective(objective.name);

    Rng rng(config.seed);
    SolutionVector x(config.dimension);
    for (double& xi : x) xi = rng.uniform(config.init_low, config.init_high);
    double fx = f(x);
    double sigma = config.sigma0;

    for (std::size_t g = 1; g <= config.max_generations; ++g) {
        SolutionVector candidate = mutate(x, sigma, rng);
        const double fc = f(candidate);
        const bool success = fc <= fx;
        if (success) {
            x = std::move(candidate);
            fx = fc;
        }
        sigma = update_sigma(sigma, config.tau, success);
        if (observer) observer(GenerationTrace{g, fx, sigma, success});
    }

    return EsRunResult{fx, score_of(fx), sigma, config.max_generations, config.seed};
}

}  // namespace llmes

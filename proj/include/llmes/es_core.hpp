#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "llmes/rng.hpp"

namespace llmes {

using SolutionVector = std::vector<double>;

// Objective values below this are clamped before taking the log.
inline constexpr double kScoreFloor = 1e-300;

struct ObjectiveSpec {
    std::string name = "sphere";
    std::size_t dimension = 5;

    bool operator==(const ObjectiveSpec&) const = default;
};

using ObjectiveFn = std::function<double(std::span<const double>)>;

// Names accepted by resolve_objective, sorted.
std::vector<std::string> objective_names();

// Throws ConfigError naming the valid objectives when `name` is unknown.
ObjectiveFn resolve_objective(const std::string& name);

struct EsConfig {
    double tau = 0.95;
    double sigma0 = 1.0;
    std::size_t dimension = 5;
    std::size_t max_generations = 1000;
    double init_low = -5.0;
    double init_high = 5.0;
    std::uint64_t seed = 0;

    // Throws ConfigError on the first violated invariant.
    void validate() const;

    bool operator==(const EsConfig&) const = default;
};

struct EsRunResult {
    double best_f = 0.0;
    double score = 0.0;
    double final_sigma = 0.0;
    std::size_t generations_run = 0;
    std::uint64_t seed = 0;

    bool operator==(const EsRunResult&) const = default;
};

// State after one generation, passed to the optional run_es observer.
struct GenerationTrace {
    std::size_t generation = 0;  // 1-based
    double f = 0.0;              // objective of the accepted point
    double sigma = 0.0;          // step size after the update
    bool success = false;
};

// f(x) = sum x_i^2, accumulated left to right.
double sphere_eval(std::span<const double> x);

// x + sigma * g with g drawn coordinate-wise from rng.standard_normal().
SolutionVector mutate(std::span<const double> x, double sigma, Rng& rng);

// One-fifth rule: sigma * exp(tau * (indicator - 1/5)).
double update_sigma(double sigma, double tau, bool success);

// -ln(max(f, kScoreFloor)). Throws InvalidInputError for negative or NaN f.
double score_of(double f_value);

// (1+1)-ES. Offspring replaces the parent when f(x') <= f(x); sigma is
// updated every generation. Pure in (config, objective).
EsRunResult run_es(const EsConfig& config, const ObjectiveSpec& objective,
                   const std::function<void(const GenerationTrace&)>& observer = {});

}  // namespace llmes

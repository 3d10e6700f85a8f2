#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llmes/session.hpp"

namespace llmes {

struct GridSpec {
    double tau_min = 0.6;
    double tau_max = 1.5;
    std::size_t steps = 10;

    void validate() const;
    // Evenly spaced, both ends included, rounded to 12 decimal places.
    std::vector<double> values() const;
};

std::vector<Trial> run_grid(const GridSpec& grid, const SessionConfig& cfg);

// tau,mean_fitness,std_fitness,replicates; rows sorted by tau.
std::string render_csv(std::span<const Trial> trials);
void emit_csv(std::span<const Trial> trials, const std::filesystem::path& path);

// Standalone SVG line plot of mean fitness against tau. Data points are
// <circle class="point">; best_tau gets one <circle class="best">.
// Throws PreconditionError with fewer than two trials.
std::string render_plot(std::span<const Trial> trials, std::optional<double> best_tau);
void emit_plot(std::span<const Trial> trials, std::optional<double> best_tau,
               const std::filesystem::path& path);

}  // namespace llmes

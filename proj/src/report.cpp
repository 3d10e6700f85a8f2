#include "llmes/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "llmes/errors.hpp"
#include "llmes/number_format.hpp"
#include "llmes/tuning_loop.hpp"

namespace llmes {

void GridSpec::validate() const {
    if (!(tau_min > 0.0) || !std::isfinite(tau_max)) throw ConfigError("grid bounds must be positive and finite");
    if (!(tau_min < tau_max)) throw ConfigError("tau-min must be below tau-max");
    if (steps < 2) throw ConfigError("grid needs at least 2 steps");
}

std::vector<double> GridSpec::values() const {
    validate();
    std::vector<double> out;
    out.reserve(steps);
    const double n = static_cast<double>(steps - 1);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) / n;
        double v = i + 1 == steps ? tau_max : tau_min + (tau_max - tau_min) * t;
        // 0.6 + 3 * 0.1 should read as 0.9 in logs
        v = *parse_double(fixed_repr(v, 12));
        out.push_back(v);
    }
    return out;
}

std::vector<Trial> run_grid(const GridSpec& grid, const SessionConfig& cfg) {
    cfg.validate();
    std::vector<Trial> trials;
    const auto taus = grid.values();
    for (std::size_t i = 0; i < taus.size(); ++i) trials.push_back(run_trial(taus[i], cfg, i));
    return trials;
}

namespace {

std::vector<const Trial*> sorted_by_tau(std::span<const Trial> trials) {
    std::vector<const Trial*> out;
    for (const Trial& t : trials) out.push_back(&t);
    std::stable_sort(out.begin(), out.end(), [](const Trial* a, const Trial* b) { return a->tau < b->tau; });
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::string render_csv(std::span<const Trial> trials) {
    if (trials.empty()) throw PreconditionError("CSV needs at least one trial");
    std::string out = "tau,mean_fitness,std_fitness,replicates\n";
    for (const Trial* t : sorted_by_tau(trials)) {
        out += shortest_repr(t->tau) + ',' + shortest_repr(t->mean_score) + ',' + shortest_repr(t->std_score) + ',' +
               std::to_string(t->results.size()) + '\n';
    }
    return out;
}

void emit_csv(std::span<const Trial> trials, const std::filesystem::path& path) {
    write_file(path, render_csv(trials));
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 20.0;
constexpr double kBottom = 50.0;
constexpr int kTicks = 5;

struct Axis {
    double lo;
    double hi;
    double px_lo;
    double px_hi;

    double map(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

Axis padded(double lo, double hi, double px_lo, double px_hi) {
    if (hi - lo <= 0.0) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, px_lo, px_hi};
}

std::string px(double v) { return fixed_repr(v, 2); }

}  // namespace

std::string render_plot(std::span<const Trial> trials, std::optional<double> best_tau) {
    if (trials.size() < 2) throw PreconditionError("plot needs at least 2 trials; use the CSV output instead");
    const auto points = sorted_by_tau(trials);

    double y_lo = points.front()->mean_score;
    double y_hi = y_lo;
    for (const Trial* t : points) {
        y_lo = std::min(y_lo, t->mean_score);
        y_hi = std::max(y_hi, t->mean_score);
    }
    const Axis x = padded(points.front()->tau, points.back()->tau, kLeft, kWidth - kRight);
    // SVG y grows downward
    const Axis y = padded(y_lo, y_hi, kHeight - kBottom, kTop);

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kWidth) + "\" height=\"" + px(kHeight) +
           "\" viewBox=\"0 0 " + px(kWidth) + ' ' + px(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + px(kWidth) + "\" height=\"" + px(kHeight) + "\" fill=\"white\"/>\n";

    const std::string x0 = px(kLeft), x1 = px(kWidth - kRight), y0 = px(kHeight - kBottom), y1 = px(kTop);
    svg += "<line class=\"axis\" x1=\"" + x0 + "\" y1=\"" + y0 + "\" x2=\"" + x1 + "\" y2=\"" + y0 + "\" stroke=\"black\"/>\n";
    svg += "<line class=\"axis\" x1=\"" + x0 + "\" y1=\"" + y0 + "\" x2=\"" + x0 + "\" y2=\"" + y1 + "\" stroke=\"black\"/>\n";

    for (int i = 0; i <= kTicks; ++i) {
        const double xv = x.lo + (x.hi - x.lo) * i / kTicks;
        const double yv = y.lo + (y.hi - y.lo) * i / kTicks;
        svg += "<text class=\"tick\" x=\"" + px(x.map(xv)) + "\" y=\"" + px(kHeight - kBottom + 16) +
               "\" text-anchor=\"middle\">" + fixed_repr(xv, 2) + "</text>\n";
        svg += "<text class=\"tick\" x=\"" + px(kLeft - 6) + "\" y=\"" + px(y.map(yv) + 4) +
               "\" text-anchor=\"end\">" + fixed_repr(yv, 1) + "</text>\n";
    }
    svg += "<text class=\"label\" x=\"" + px((kLeft + kWidth - kRight) / 2) + "\" y=\"" + px(kHeight - 12) +
           "\" text-anchor=\"middle\">tau</text>\n";
    svg += "<text class=\"label\" x=\"16\" y=\"" + px((kTop + kHeight - kBottom) / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + px((kTop + kHeight - kBottom) / 2) +
           ")\">fitness (-log f)</text>\n";

    std::string polyline;
    for (const Trial* t : points) {
        if (!polyline.empty()) polyline += ' ';
        polyline += px(x.map(t->tau)) + ',' + px(y.map(t->mean_score));
    }
    svg += "<polyline class=\"series\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"" + polyline +
           "\"/>\n";
    for (const Trial* t : points) {
        svg += "<circle class=\"point\" cx=\"" + px(x.map(t->tau)) + "\" cy=\"" + px(y.map(t->mean_score)) +
               "\" r=\"3.5\" fill=\"steelblue\" data-tau=\"" + shortest_repr(t->tau) + "\" data-fitness=\"" +
               shortest_repr(t->mean_score) + "\"/>\n";
    }

    if (best_tau) {
        const Trial* nearest = points.front();
        for (const Trial* t : points)
            if (std::abs(t->tau - *best_tau) < std::abs(nearest->tau - *best_tau)) nearest = t;
        svg += "<circle class=\"best\" cx=\"" + px(x.map(*best_tau)) + "\" cy=\"" + px(y.map(nearest->mean_score)) +
               "\" r=\"7\" fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" data-tau=\"" +
               shortest_repr(*best_tau) + "\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void emit_plot(std::span<const Trial> trials, std::optional<double> best_tau, const std::filesystem::path& path) {
    write_file(path, render_plot(trials, best_tau));
}

}  // namespace llmes

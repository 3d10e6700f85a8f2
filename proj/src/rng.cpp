#include "llmes/rng.hpp"

#include <cmath>
#include <numbers>

namespace llmes {

double Rng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double low, double high) {
    return low + (high - low) * uniform01();
}

double Rng::standard_normal() {
    if (cached_normal_) {
        const double z = *cached_normal_;
        cached_normal_.reset();
        return z;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    // 1 - u1 is in (0, 1], so the log is finite.
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    return r * std::cos(theta);
}

}  // namespace llmes

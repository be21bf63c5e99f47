#pragma once

#include <cmath>
#include <stdexcept>

namespace moco {

// Variance-exploding noise schedule on t in [0, 1]:
//   sigma(t) = sigma_min * (sigma_max / sigma_min)^t
// so that g(t) = sigma(t) * sqrt(2 log(sigma_max / sigma_min)) satisfies
// d sigma^2/dt = g^2.
struct NoiseSchedule {
    double sigma_min = 0.01;
    double sigma_max = 50.0;
    static constexpr double t_end = 1.0;

    NoiseSchedule() = default;
    NoiseSchedule(double smin, double smax) : sigma_min(smin), sigma_max(smax) {
        if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
            throw std::invalid_argument("NoiseSchedule: need 0 < sigma_min < sigma_max");
    }

    double log_ratio() const { return std::log(sigma_max / sigma_min); }

    double sigma(double t) const {
        check_time(t);
        return sigma_min * std::exp(log_ratio() * t);
    }

    double sigma2(double t) const {
        const double s = sigma(t);
        return s * s;
    }

    double diffusion_g(double t) const { return sigma(t) * std::sqrt(2.0 * log_ratio()); }

    double g_squared(double t) const { return 2.0 * log_ratio() * sigma2(t); }

    static void check_time(double t) {
        if (!(t >= 0.0 && t <= t_end))
            throw std::invalid_argument("NoiseSchedule: t outside [0, 1]");
    }
};

}  // namespace moco

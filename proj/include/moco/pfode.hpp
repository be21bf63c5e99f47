#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "moco/errors.hpp"
#include "moco/image.hpp"
#include "moco/rng.hpp"
#include "moco/schedule.hpp"
#include "moco/score.hpp"

namespace moco {

// Fixed-step RK4 on both passes; 10 forward / 20 adjoint steps by default.
struct OdeConfig {
    int forward_steps = 10;
    int adjoint_steps = 20;

    void validate() const {
        if (forward_steps < 1 || adjoint_steps < 1)
            throw std::invalid_argument("OdeConfig: steps must be >= 1");
    }
};

enum class TraceMode { exact, hutchinson };

struct TraceEstimatorConfig {
    TraceMode mode = TraceMode::hutchinson;
    int probes = 1;  // M; ignored in exact mode
    SeededRng rng;
    int exact_dim_cap = 4096;

    void validate() const {
        if (probes < 1) throw std::invalid_argument("TraceEstimatorConfig: probes must be >= 1");
    }
};

struct LikelihoodResult {
    double logp = 0.0;
    double prior_logp = 0.0;
    double divergence_integral = 0.0;
    std::optional<Image> gradient;  // d logp / d x(0), present iff requested
};

// log N(x_T; 0, sigma_max^2 I)
inline double prior_logp(const NoiseSchedule& sched, const Image& x_T) {
    const double s2 = sched.sigma_max * sched.sigma_max;
    const double d = static_cast<double>(x_T.size());
    double q = 0.0;
    for (double v : x_T.data) q += v * v;
    return -0.5 * d * std::log(2.0 * M_PI * s2) - 0.5 * q / s2;
}

namespace detail {

inline void check_finite_state(const Image& x, int step, const char* where) {
    for (double v : x.data)
        if (!std::isfinite(v))
            throw divergence_error(std::string(where) + ": non-finite state at step " +
                                   std::to_string(step));
}

// Stage time for step n at RK fraction frac, clamped so rounding never
// escapes the schedule's domain.
inline double stage_time(double t0, double t1, int steps, int n, double frac) {
    const double t = t0 + (t1 - t0) * ((n + frac) / steps);
    return std::clamp(t, 0.0, NoiseSchedule::t_end);
}

// Trace of d(pf_drift)/dx at (x, t), estimated with the given probes
// (Rademacher images) or exactly via basis-vector VJPs.
inline double drift_divergence(const ScoreFunction& score, const NoiseSchedule& sched,
                               const Image& x, double t, const std::vector<Image>& probes,
                               bool exact) {
    const double c = -0.5 * sched.g_squared(t);
    double tr = 0.0;
    if (exact) {
        Image e = x.like();
        for (std::size_t i = 0; i < x.size(); ++i) {
            e.data[i] = 1.0;
            tr += score.vjp(x, t, e).data[i];
            e.data[i] = 0.0;
        }
    } else {
        for (const Image& eps : probes) tr += dot(eps.data, score.vjp(x, t, eps).data);
        tr /= static_cast<double>(probes.size());
    }
    return c * tr;
}

// Gradient of the divergence estimate with respect to x. For a probe eps this
// is the Hessian-vector product of the scalar field score(.)·eps, obtained as
// the tangent of the VJP pass along direction eps.
inline Image drift_divergence_grad(const ScoreFunction& score, const NoiseSchedule& sched,
                                   const Image& x, double t, const std::vector<Image>& probes,
                                   bool exact) {
    const double c = -0.5 * sched.g_squared(t);
    Image g = x.like();
    if (exact) {
        Image e = x.like();
        for (std::size_t i = 0; i < x.size(); ++i) {
            e.data[i] = 1.0;
            axpy(1.0, score.vjp_tangent(x, t, e, e).data, g.data);
            e.data[i] = 0.0;
        }
    } else {
        for (const Image& eps : probes) axpy(1.0, score.vjp_tangent(x, t, eps, eps).data, g.data);
        for (double& v : g.data) v /= static_cast<double>(probes.size());
    }
    for (double& v : g.data) v *= c;
    return g;
}

inline std::vector<Image> draw_probes(const Image& shape_like, TraceEstimatorConfig& cfg) {
    std::vector<Image> probes;
    if (cfg.mode == TraceMode::hutchinson) {
        probes.reserve(static_cast<std::size_t>(cfg.probes));
        for (int m = 0; m < cfg.probes; ++m) {
            Image eps = shape_like.like();
            for (double& v : eps.data) v = static_cast<double>(cfg.rng.rademacher_one());
            probes.push_back(std::move(eps));
        }
    } else if (static_cast<int>(shape_like.size()) > cfg.exact_dim_cap) {
        throw resource_error("exact trace requested for d = " + std::to_string(shape_like.size()) +
                             " > cap " + std::to_string(cfg.exact_dim_cap));
    }
    return probes;
}

}  // namespace detail

// Integrate dx/dt = pf_drift(x, t) from t0 to t1 (either direction) with
// fixed-step RK4.
inline Image flow(const ScoreFunction& score, const NoiseSchedule& sched, int steps,
                  Image x, double t0, double t1) {
    if (steps < 1) throw std::invalid_argument("flow: steps must be >= 1");
    const double h = (t1 - t0) / steps;
    for (int n = 0; n < steps; ++n) {
        const double t = detail::stage_time(t0, t1, steps, n, 0.0);
        const double tm = detail::stage_time(t0, t1, steps, n, 0.5);
        const double te = detail::stage_time(t0, t1, steps, n, 1.0);
        Image k1 = pf_drift(sched, score, x, t);
        Image x2 = x;
        axpy(0.5 * h, k1.data, x2.data);
        Image k2 = pf_drift(sched, score, x2, tm);
        Image x3 = x;
        axpy(0.5 * h, k2.data, x3.data);
        Image k3 = pf_drift(sched, score, x3, tm);
        Image x4 = x;
        axpy(h, k3.data, x4.data);
        Image k4 = pf_drift(sched, score, x4, te);
        for (std::size_t i = 0; i < x.size(); ++i)
            x.data[i] += h / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]);
        detail::check_finite_state(x, n, "flow");
    }
    return x;
}

// Eq.-2-style sampling: integrate the probability-flow ODE backward in time
// from a prior draw x(T) to a data-space sample x(0).
inline Image sample(const ScoreFunction& score, const NoiseSchedule& sched, const OdeConfig& cfg,
                    const Image& x_T) {
    cfg.validate();
    if (!x_T.all_finite()) throw std::invalid_argument("sample: non-finite x_T");
    return flow(score, sched, cfg.forward_steps, x_T, NoiseSchedule::t_end, 0.0);
}

// One-off divergence estimate at (x, t); draws a fresh probe realization.
inline double divergence_estimate(const ScoreFunction& score, const NoiseSchedule& sched,
                                  const Image& x, double t, TraceEstimatorConfig trace_cfg) {
    trace_cfg.validate();
    NoiseSchedule::check_time(t);
    const bool exact = trace_cfg.mode == TraceMode::exact;
    std::vector<Image> probes = detail::draw_probes(x, trace_cfg);
    return detail::drift_divergence(score, sched, x, t, probes, exact);
}

// Exact log-likelihood via the continuous change-of-variables formula:
//   logp(x(0)) = prior_logp(x(T)) + int_0^T tr(d f_tilde/dx) dt
// evolving (x, l) forward with RK4. With want_gradient the reverse pass
// solves the adjoint ODE, re-evolving x backward alongside the adjoint so no
// forward states are stored. Probes are drawn once per call and shared by
// both passes.
inline LikelihoodResult log_likelihood(const ScoreFunction& score, const NoiseSchedule& sched,
                                       const OdeConfig& ode_cfg, TraceEstimatorConfig trace_cfg,
                                       const Image& x0, bool want_gradient = false) {
    ode_cfg.validate();
    trace_cfg.validate();
    if (!x0.all_finite()) throw std::invalid_argument("log_likelihood: non-finite input");

    const bool exact = trace_cfg.mode == TraceMode::exact;
    std::vector<Image> probes = detail::draw_probes(x0, trace_cfg);

    const double T = NoiseSchedule::t_end;

    // Forward pass: augmented state (x, l).
    Image x = x0;
    double ell = 0.0;
    {
        const double h = T / ode_cfg.forward_steps;
        for (int n = 0; n < ode_cfg.forward_steps; ++n) {
            const double t = detail::stage_time(0.0, T, ode_cfg.forward_steps, n, 0.0);
            const double tm = detail::stage_time(0.0, T, ode_cfg.forward_steps, n, 0.5);
            const double te = detail::stage_time(0.0, T, ode_cfg.forward_steps, n, 1.0);
            auto stage = [&](const Image& xs, double ts, Image& dx, double& dl) {
                dx = pf_drift(sched, score, xs, ts);
                dl = detail::drift_divergence(score, sched, xs, ts, probes, exact);
            };
            Image k1x;
            double k1l;
            stage(x, t, k1x, k1l);
            Image x2 = x;
            axpy(0.5 * h, k1x.data, x2.data);
            Image k2x;
            double k2l;
            stage(x2, tm, k2x, k2l);
            Image x3 = x;
            axpy(0.5 * h, k2x.data, x3.data);
            Image k3x;
            double k3l;
            stage(x3, tm, k3x, k3l);
            Image x4 = x;
            axpy(h, k3x.data, x4.data);
            Image k4x;
            double k4l;
            stage(x4, te, k4x, k4l);
            for (std::size_t i = 0; i < x.size(); ++i)
                x.data[i] +=
                    h / 6.0 * (k1x.data[i] + 2.0 * k2x.data[i] + 2.0 * k3x.data[i] + k4x.data[i]);
            ell += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
            detail::check_finite_state(x, n, "log_likelihood forward");
        }
    }

    LikelihoodResult res;
    res.prior_logp = prior_logp(sched, x);
    res.divergence_integral = ell;
    res.logp = res.prior_logp + res.divergence_integral;

    if (want_gradient) {
        // Adjoint state a(t) = d logp / d x(t), integrated T -> 0:
        //   da/dt = -(d f_tilde/dx)^T a - d(divergence)/dx
        // with a(T) = d prior_logp / d x(T) = -x(T)/sigma_max^2.
        const double smax2 = sched.sigma_max * sched.sigma_max;
        Image a = x.like();
        for (std::size_t i = 0; i < x.size(); ++i) a.data[i] = -x.data[i] / smax2;

        Image xb = x;  // re-evolved backward alongside the adjoint
        const double h = -T / ode_cfg.adjoint_steps;
        for (int n = 0; n < ode_cfg.adjoint_steps; ++n) {
            const double t = detail::stage_time(T, 0.0, ode_cfg.adjoint_steps, n, 0.0);
            const double tm = detail::stage_time(T, 0.0, ode_cfg.adjoint_steps, n, 0.5);
            const double te = detail::stage_time(T, 0.0, ode_cfg.adjoint_steps, n, 1.0);
            auto stage = [&](const Image& xs, const Image& as, double ts, Image& dx, Image& da) {
                dx = pf_drift(sched, score, xs, ts);
                const double c = -0.5 * sched.g_squared(ts);
                da = score.vjp(xs, ts, as);
                for (double& v : da.data) v *= -c;  // -(df/dx)^T a
                Image dg = detail::drift_divergence_grad(score, sched, xs, ts, probes, exact);
                axpy(-1.0, dg.data, da.data);
            };
            Image k1x, k1a;
            stage(xb, a, t, k1x, k1a);
            Image x2 = xb, a2 = a;
            axpy(0.5 * h, k1x.data, x2.data);
            axpy(0.5 * h, k1a.data, a2.data);
            Image k2x, k2a;
            stage(x2, a2, tm, k2x, k2a);
            Image x3 = xb, a3 = a;
            axpy(0.5 * h, k2x.data, x3.data);
            axpy(0.5 * h, k2a.data, a3.data);
            Image k3x, k3a;
            stage(x3, a3, tm, k3x, k3a);
            Image x4 = xb, a4 = a;
            axpy(h, k3x.data, x4.data);
            axpy(h, k3a.data, a4.data);
            Image k4x, k4a;
            stage(x4, a4, te, k4x, k4a);
            for (std::size_t i = 0; i < xb.size(); ++i) {
                xb.data[i] +=
                    h / 6.0 * (k1x.data[i] + 2.0 * k2x.data[i] + 2.0 * k3x.data[i] + k4x.data[i]);
                a.data[i] +=
                    h / 6.0 * (k1a.data[i] + 2.0 * k2a.data[i] + 2.0 * k3a.data[i] + k4a.data[i]);
            }
            detail::check_finite_state(a, n, "log_likelihood adjoint");
        }
        res.gradient = std::move(a);
    }
    return res;
}

}  // namespace moco

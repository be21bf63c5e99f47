#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "moco/image.hpp"
#include "moco/schedule.hpp"

namespace moco {

// Map (image, t) -> score field approximating the gradient of log p_t.
// vjp / vjp_tangent expose the first and second derivative actions the ODE
// adjoint needs:
//   vjp(x, t, u)        = J(x,t)^T u            with J = d score / d x
//   vjp_tangent(x,t,w,u)= d/da [ vjp(x+a*w, t, u) ] at a = 0
class ScoreFunction {
public:
    virtual ~ScoreFunction() = default;

    virtual Image evaluate(const Image& x, double t) const = 0;
    virtual Image vjp(const Image& x, double t, const Image& cotangent) const = 0;
    virtual Image vjp_tangent(const Image& x, double t, const Image& tangent,
                              const Image& cotangent) const = 0;
};

namespace detail {

// VE marginal variance of a data Gaussian N(mean, s^2 I):
// v(t) = s^2 + sigma(t)^2 - sigma_min^2, so v(0) = s^2 exactly.
inline double ve_marginal_var(const NoiseSchedule& sched, double s2, double t) {
    return s2 + sched.sigma2(t) - sched.sigma_min * sched.sigma_min;
}

}  // namespace detail

// Exact score of a VE-perturbed Gaussian N(mean, s^2 I); verification oracle.
class GaussianScore : public ScoreFunction {
public:
    GaussianScore(Image mean, double variance, NoiseSchedule sched)
        : mean_(std::move(mean)), s2_(variance), sched_(sched) {
        if (!(s2_ >= 0.0)) throw std::invalid_argument("GaussianScore: variance must be >= 0");
    }

    double marginal_var(double t) const { return detail::ve_marginal_var(sched_, s2_, t); }

    Image evaluate(const Image& x, double t) const override {
        if (!x.same_shape(mean_)) throw std::invalid_argument("GaussianScore: shape mismatch");
        const double v = marginal_var(t);
        Image out = x.like();
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = -(x.data[i] - mean_.data[i]) / v;
        return out;
    }

    Image vjp(const Image& x, double t, const Image& cot) const override {
        const double v = marginal_var(t);
        Image out = x.like();
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = -cot.data[i] / v;
        return out;
    }

    Image vjp_tangent(const Image& x, double /*t*/, const Image& /*tan*/,
                      const Image& /*cot*/) const override {
        return x.like();  // Jacobian is constant in x
    }

    double analytic_logp(const Image& x, double t) const {
        NoiseSchedule::check_time(t);
        const double v = marginal_var(t);
        const double d = static_cast<double>(x.size());
        double q = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = x.data[i] - mean_.data[i];
            q += r * r;
        }
        return -0.5 * d * std::log(2.0 * M_PI * v) - 0.5 * q / v;
    }

    const Image& mean() const { return mean_; }
    double variance() const { return s2_; }

private:
    Image mean_;
    double s2_;
    NoiseSchedule sched_;
};

// Exact score of a VE-perturbed isotropic Gaussian mixture; multi-modal oracle.
class GaussianMixtureScore : public ScoreFunction {
public:
    struct Component {
        double weight;
        Image mean;
        double variance;
    };

    GaussianMixtureScore(std::vector<Component> comps, NoiseSchedule sched)
        : comps_(std::move(comps)), sched_(sched) {
        if (comps_.empty()) throw std::invalid_argument("GaussianMixtureScore: no components");
        double wsum = 0.0;
        for (const auto& c : comps_) {
            if (!(c.weight > 0.0) || !(c.variance >= 0.0))
                throw std::invalid_argument("GaussianMixtureScore: bad component");
            if (!c.mean.same_shape(comps_.front().mean))
                throw std::invalid_argument("GaussianMixtureScore: component shape mismatch");
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-9)
            throw std::invalid_argument("GaussianMixtureScore: weights must sum to 1");
    }

    Image evaluate(const Image& x, double t) const override {
        Work wk = prepare(x, t);
        Image out = x.like();
        for (std::size_t k = 0; k < comps_.size(); ++k)
            axpy(wk.q[k], wk.a[k].data, out.data);
        return out;
    }

    // The score Jacobian is the (symmetric) Hessian of log p_t:
    //   H = sum_k q_k (a_k a_k^T - I/v_k) - s s^T
    Image vjp(const Image& x, double t, const Image& cot) const override {
        Work wk = prepare(x, t);
        return apply_hessian(wk, cot);
    }

    Image vjp_tangent(const Image& x, double t, const Image& tan,
                      const Image& cot) const override {
        Work wk = prepare(x, t);
        const Image Hw = apply_hessian(wk, tan);
        const double s_dot_u = dot(wk.score.data, cot.data);
        const double w_dot_u = dot(tan.data, cot.data);

        Image out = x.like();
        for (std::size_t k = 0; k < comps_.size(); ++k) {
            const double vk = wk.v[k];
            const double ak_u = dot(wk.a[k].data, cot.data);
            const double dlogq_w = dot(wk.a[k].data, tan.data) - dot(wk.score.data, tan.data);
            // d/da of q_k (a_k (a_k.u) - u/v_k)
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double base = wk.a[k].data[i] * ak_u - cot.data[i] / vk;
                const double inner =
                    -tan.data[i] * ak_u / vk - wk.a[k].data[i] * w_dot_u / vk;
                out.data[i] += wk.q[k] * (dlogq_w * base + inner);
            }
        }
        // d/da of -s s^T u = -(Hw)(s.u) - s (Hw.u)
        const double Hw_dot_u = dot(Hw.data, cot.data);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.data[i] -= Hw.data[i] * s_dot_u + wk.score.data[i] * Hw_dot_u;
        return out;
    }

    double analytic_logp(const Image& x, double t) const {
        NoiseSchedule::check_time(t);
        const double d = static_cast<double>(x.size());
        std::vector<double> logr(comps_.size());
        for (std::size_t k = 0; k < comps_.size(); ++k) {
            const double v = detail::ve_marginal_var(sched_, comps_[k].variance, t);
            double q = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double r = x.data[i] - comps_[k].mean.data[i];
                q += r * r;
            }
            logr[k] = std::log(comps_[k].weight) - 0.5 * d * std::log(2.0 * M_PI * v) -
                      0.5 * q / v;
        }
        double mx = logr[0];
        for (double lv : logr) mx = std::max(mx, lv);
        double acc = 0.0;
        for (double lv : logr) acc += std::exp(lv - mx);
        return mx + std::log(acc);
    }

    const std::vector<Component>& components() const { return comps_; }

private:
    struct Work {
        std::vector<double> q;   // posterior responsibilities
        std::vector<double> v;   // per-component marginal variances
        std::vector<Image> a;    // a_k = -(x - mu_k)/v_k
        Image score;
    };

    Work prepare(const Image& x, double t) const {
        NoiseSchedule::check_time(t);
        if (!x.same_shape(comps_.front().mean))
            throw std::invalid_argument("GaussianMixtureScore: shape mismatch");
        Work wk;
        const std::size_t K = comps_.size();
        const double d = static_cast<double>(x.size());
        std::vector<double> logr(K);
        wk.v.resize(K);
        wk.a.reserve(K);
        for (std::size_t k = 0; k < K; ++k) {
            wk.v[k] = detail::ve_marginal_var(sched_, comps_[k].variance, t);
            Image ak = x.like();
            double q = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double r = x.data[i] - comps_[k].mean.data[i];
                ak.data[i] = -r / wk.v[k];
                q += r * r;
            }
            logr[k] = std::log(comps_[k].weight) - 0.5 * d * std::log(2.0 * M_PI * wk.v[k]) -
                      0.5 * q / wk.v[k];
            wk.a.push_back(std::move(ak));
        }
        double mx = logr[0];
        for (double lv : logr) mx = std::max(mx, lv);
        double z = 0.0;
        wk.q.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            wk.q[k] = std::exp(logr[k] - mx);
            z += wk.q[k];
        }
        for (std::size_t k = 0; k < K; ++k) wk.q[k] /= z;
        wk.score = x.like();
        for (std::size_t k = 0; k < K; ++k) axpy(wk.q[k], wk.a[k].data, wk.score.data);
        return wk;
    }

    Image apply_hessian(const Work& wk, const Image& u) const {
        Image out = u.like();
        for (std::size_t k = 0; k < comps_.size(); ++k) {
            const double ak_u = dot(wk.a[k].data, u.data);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.data[i] += wk.q[k] * (wk.a[k].data[i] * ak_u - u.data[i] / wk.v[k]);
        }
        const double s_u = dot(wk.score.data, u.data);
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= wk.score.data[i] * s_u;
        return out;
    }

    std::vector<Component> comps_;
    NoiseSchedule sched_;
};

// Probability-flow drift with zero SDE drift term:
//   f_tilde(x, t) = -0.5 * g(t)^2 * score(x, t)
inline Image pf_drift(const NoiseSchedule& sched, const ScoreFunction& score, const Image& x,
                      double t) {
    NoiseSchedule::check_time(t);
    const double c = -0.5 * sched.g_squared(t);
    Image s = score.evaluate(x, t);
    for (double& v : s.data) v *= c;
    return s;
}

// Closed-form VE-marginal log-density for the analytic score families.
inline double analytic_logp(const GaussianScore& gs, const Image& x, double t) {
    return gs.analytic_logp(x, t);
}
inline double analytic_logp(const GaussianMixtureScore& gm, const Image& x, double t) {
    return gm.analytic_logp(x, t);
}

}  // namespace moco

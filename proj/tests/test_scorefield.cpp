#include <catch2/catch_amalgamated.hpp>

#include "moco/schedule.hpp"
#include "moco/score.hpp"

#include "support.hpp"

using namespace moco;
using testsupport::rel_err;

namespace {

Image const_image(int h, int w, double v) { return Image(h, w, 1.0, v); }

GaussianMixtureScore two_blob_mixture(int h, int w, NoiseSchedule sched) {
    std::vector<GaussianMixtureScore::Component> comps;
    comps.push_back({0.3, const_image(h, w, -0.5), 0.4});
    comps.push_back({0.7, const_image(h, w, 0.8), 0.9});
    return GaussianMixtureScore(std::move(comps), sched);
}

}  // namespace

TEST_CASE("sigma hits the boundaries and the geometric midpoint") {
    NoiseSchedule sched(0.01, 50.0);
    REQUIRE(sched.sigma(0.0) == Catch::Approx(0.01).epsilon(1e-12));
    REQUIRE(sched.sigma(1.0) == Catch::Approx(50.0).epsilon(1e-12));
    REQUIRE(sched.sigma(0.5) == Catch::Approx(std::sqrt(0.01 * 50.0)).epsilon(1e-12));
    REQUIRE_THROWS_AS(sched.sigma(-0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(sched.sigma(1.1), std::invalid_argument);
}

TEST_CASE("diffusion coefficient follows g = sigma * sqrt(2 log ratio)") {
    const double smin = 0.3;
    NoiseSchedule sched(smin, M_E * smin);  // log ratio = 1
    REQUIRE(sched.diffusion_g(0.0) == Catch::Approx(smin * std::sqrt(2.0)).epsilon(1e-12));

    REQUIRE_THROWS_AS(NoiseSchedule(1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(NoiseSchedule(2.0, 1.0), std::invalid_argument);

    // g(t)/sigma(t) is constant in t
    NoiseSchedule s2(0.01, 50.0);
    const double r0 = s2.diffusion_g(0.1) / s2.sigma(0.1);
    const double r1 = s2.diffusion_g(0.9) / s2.sigma(0.9);
    REQUIRE(r0 == Catch::Approx(r1).epsilon(1e-12));
}

TEST_CASE("pf_drift is zero for zero score and at the Gaussian mean") {
    NoiseSchedule sched(0.01, 50.0);
    Image mu = const_image(4, 4, 0.0);
    GaussianScore gs(mu, 1.0, sched);
    Image drift = pf_drift(sched, gs, mu, 0.3);
    for (double v : drift.data) REQUIRE(v == 0.0);
}

TEST_CASE("pf_drift scales linearly with g squared") {
    // same score value, two schedules whose g^2 differ by a known factor
    Image mu = const_image(3, 3, 0.0);
    Image x = const_image(3, 3, 0.7);
    NoiseSchedule a(1.0, std::exp(1.0));   // log ratio 1
    NoiseSchedule b(1.0, std::exp(2.0));   // log ratio 2
    // evaluate both at t=0 where sigma = 1 for each, so score args agree
    GaussianScore ga(mu, 2.0, a), gb(mu, 2.0, b);
    Image da = pf_drift(a, ga, x, 0.0);
    Image db = pf_drift(b, gb, x, 0.0);
    for (std::size_t i = 0; i < da.size(); ++i)
        REQUIRE(db.data[i] == Catch::Approx(2.0 * da.data[i]).epsilon(1e-12));
}

TEST_CASE("analytic_logp matches the standard normal closed form") {
    NoiseSchedule sched(0.01, 50.0);
    Image mu = const_image(2, 2, 0.0);
    GaussianScore gs(mu, 1.0, sched);
    const double got = analytic_logp(gs, mu, 0.0);
    REQUIRE(got == Catch::Approx(-2.0 * std::log(2.0 * M_PI)).epsilon(1e-12));
    REQUIRE(got == Catch::Approx(-3.6757).margin(1e-4));
}

TEST_CASE("single-component mixture equals the plain Gaussian") {
    NoiseSchedule sched(0.01, 50.0);
    Image mu = const_image(3, 3, 0.25);
    GaussianScore gs(mu, 0.5, sched);
    std::vector<GaussianMixtureScore::Component> comps;
    comps.push_back({1.0, mu, 0.5});
    GaussianMixtureScore gm(std::move(comps), sched);

    SeededRng rng(5, 0);
    for (int it = 0; it < 10; ++it) {
        Image x = testsupport::random_image(3, 3, 1.0, rng);
        const double t = rng.uniform(0.0, 1.0);
        REQUIRE(analytic_logp(gm, x, t) == Catch::Approx(analytic_logp(gs, x, t)).epsilon(1e-10));
        Image s1 = gs.evaluate(x, t);
        Image s2 = gm.evaluate(x, t);
        for (std::size_t i = 0; i < s1.size(); ++i)
            REQUIRE(s2.data[i] == Catch::Approx(s1.data[i]).margin(1e-10));
    }
}

TEST_CASE("density at the mean decreases as t grows") {
    NoiseSchedule sched(0.01, 50.0);
    Image mu = const_image(2, 2, 0.1);
    GaussianScore gs(mu, 1.0, sched);
    double prev = analytic_logp(gs, mu, 0.0);
    for (double t : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const double cur = analytic_logp(gs, mu, t);
        REQUIRE(cur < prev);
        prev = cur;
    }
}

TEST_CASE("GaussianScore equals the numerical gradient of analytic_logp") {
    NoiseSchedule sched(0.01, 50.0);
    Image mu = const_image(4, 4, 0.3);
    GaussianScore gs(mu, 0.8, sched);
    SeededRng rng(17, 0);
    const double step = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
        Image x = testsupport::random_image(4, 4, 1.0, rng);
        const double t = rng.uniform(0.0, 1.0);
        Image s = gs.evaluate(x, t);
        const std::size_t i = static_cast<std::size_t>(rng.uniform(0.0, 15.999));
        Image xp = x, xm = x;
        xp.data[i] += step;
        xm.data[i] -= step;
        const double fd = (analytic_logp(gs, xp, t) - analytic_logp(gs, xm, t)) / (2 * step);
        REQUIRE(rel_err(s.data[i], fd) <= 1e-6);
    }
}

TEST_CASE("mixture score equals the numerical gradient of its log density") {
    NoiseSchedule sched(0.01, 50.0);
    GaussianMixtureScore gm = two_blob_mixture(3, 3, sched);
    SeededRng rng(19, 0);
    const double step = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        Image x = testsupport::random_image(3, 3, 1.0, rng);
        const double t = rng.uniform(0.0, 1.0);
        Image s = gm.evaluate(x, t);
        const std::size_t i = static_cast<std::size_t>(rng.uniform(0.0, 8.999));
        Image xp = x, xm = x;
        xp.data[i] += step;
        xm.data[i] -= step;
        const double fd = (analytic_logp(gm, xp, t) - analytic_logp(gm, xm, t)) / (2 * step);
        REQUIRE(std::abs(s.data[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("mixture vjp matches finite differences of evaluate") {
    NoiseSchedule sched(0.1, 10.0);
    GaussianMixtureScore gm = two_blob_mixture(2, 3, sched);
    SeededRng rng(23, 0);
    Image x = testsupport::random_image(2, 3, 1.0, rng);
    Image u = testsupport::random_image(2, 3, 1.0, rng);
    const double t = 0.15;
    Image got = gm.vjp(x, t, u);
    const double step = 1e-6;
    for (std::size_t j = 0; j < x.size(); ++j) {
        Image xp = x, xm = x;
        xp.data[j] += step;
        xm.data[j] -= step;
        Image sp = gm.evaluate(xp, t);
        Image sm = gm.evaluate(xm, t);
        double fd = 0.0;  // sum_i u_i dJ s_i/dx_j
        for (std::size_t i = 0; i < x.size(); ++i)
            fd += u.data[i] * (sp.data[i] - sm.data[i]) / (2 * step);
        REQUIRE(std::abs(got.data[j] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("mixture vjp_tangent matches finite differences of vjp") {
    NoiseSchedule sched(0.1, 10.0);
    GaussianMixtureScore gm = two_blob_mixture(2, 3, sched);
    SeededRng rng(29, 0);
    Image x = testsupport::random_image(2, 3, 1.0, rng);
    Image u = testsupport::random_image(2, 3, 1.0, rng);
    Image w = testsupport::random_image(2, 3, 1.0, rng);
    const double t = 0.4;
    Image got = gm.vjp_tangent(x, t, w, u);
    const double step = 1e-6;
    Image xp = x, xm = x;
    axpy(step, w.data, xp.data);
    axpy(-step, w.data, xm.data);
    Image vp = gm.vjp(xp, t, u);
    Image vm = gm.vjp(xm, t, u);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double fd = (vp.data[i] - vm.data[i]) / (2 * step);
        REQUIRE(std::abs(got.data[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("pf_drift with GaussianScore is affine: superposition holds") {
    NoiseSchedule sched(0.01, 50.0);
    Image mu = const_image(3, 3, 0.2);
    GaussianScore gs(mu, 1.5, sched);
    SeededRng rng(31, 0);
    Image x1 = testsupport::random_image(3, 3, 1.0, rng);
    Image x2 = testsupport::random_image(3, 3, 1.0, rng);
    const double t = 0.6, alpha = 0.37;
    // affine map F: F(x1 + a(x2-x1)) = F(x1) + a (F(x2) - F(x1))
    Image xa = x1;
    for (std::size_t i = 0; i < xa.size(); ++i)
        xa.data[i] += alpha * (x2.data[i] - x1.data[i]);
    Image f1 = pf_drift(sched, gs, x1, t);
    Image f2 = pf_drift(sched, gs, x2, t);
    Image fa = pf_drift(sched, gs, xa, t);
    for (std::size_t i = 0; i < xa.size(); ++i) {
        const double want = f1.data[i] + alpha * (f2.data[i] - f1.data[i]);
        REQUIRE(fa.data[i] == Catch::Approx(want).margin(1e-10));
    }
}

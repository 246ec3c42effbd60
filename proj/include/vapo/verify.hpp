#pragma once

// Oracle suites: closed forms and analytic derivatives checked against
// quadrature, finite differences and exact flows. Each check reports the
// measured error next to its tolerance.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "vapo/homotopy.hpp"
#include "vapo/loss.hpp"
#include "vapo/ode_sampler.hpp"
#include "vapo/oracles.hpp"
#include "vapo/potential_net.hpp"
#include "vapo/rng.hpp"

namespace vapo::verify {

struct CheckResult {
    std::string suite;
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;

    std::string line() const {
        char buf[512];
        std::snprintf(buf, sizeof buf, "[%s] %s.%s: %.3e (limit %.3e)", passed ? "PASS" : "FAIL", suite.c_str(),
                      name.c_str(), measured, tolerance);
        return buf;
    }
};

using Report = std::vector<CheckResult>;

inline bool all_passed(const Report& r) {
    for (const auto& c : r)
        if (!c.passed) return false;
    return true;
}

namespace detail {

inline CheckResult at_most(std::string suite, std::string name, double measured, double tol) {
    return {std::move(suite), std::move(name), measured, tol, std::isfinite(measured) && measured <= tol};
}

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

}  // namespace detail

/// Conditional statistics and log densities against 1-D Bayes quadrature on
/// [-10, 10] with 1e5 + 1 points.
inline Report homotopy_quadrature() {
    Report out;
    struct Case {
        double omega, sigma, xbar;
    };
    const Case cases[] = {{1.0, 1.0, 2.0}, {1.0, 0.1, 0.7}, {1.5, 0.3, -1.2}, {1.0, 0.01, 1.0}};
    for (const Case& c : cases) {
        const HomotopyParams p{c.omega, c.sigma, 1e-4, 1};
        for (double t : {0.0, 0.25, 0.5, 1.0}) {
            const oracle::BayesQuadrature1D q(c.omega, c.sigma, c.xbar, t);
            const Vec xbar{c.xbar};
            const CondStats s = cond_stats(p, xbar, t);
            double logd_err = 0.0;
            for (double k : {-3.0, -1.5, -0.5, 0.0, 0.5, 1.5, 3.0}) {
                const Vec x{s.mean[0] + k * std::sqrt(s.var)};
                logd_err = std::max(logd_err, std::abs(cond_log_density(p, x, xbar, t) - q.log_density(x[0])));
            }
            const std::string tag = detail::fmt("omega=%g,sigma=%g,t=%g", c.omega, c.sigma, t);
            out.push_back(detail::at_most("homotopy", "log_density[" + tag + "]", logd_err, 1e-6));
            out.push_back(detail::at_most("homotopy", "mean[" + tag + "]", std::abs(s.mean[0] - q.mean()), 1e-6));
            out.push_back(detail::at_most("homotopy", "var[" + tag + "]", std::abs(s.var - q.var()) / q.var(), 1e-6));
        }
    }
    return out;
}

/// Homotopy evolution PDE: finite-difference d rho_bar / dt (conditionals
/// normalized by quadrature) against the analytic right-hand side on a 1-D
/// grid with a 16-point dataset, plus mass conservation of the right-hand side.
inline Report homotopy_pde() {
    Report out;
    const double omega = 1.0;
    RngStream rng(2024);
    std::vector<double> data(16);
    for (double& v : data) v = 1.5 * rng.normal();
    Matrix dm(16, 1);
    for (std::size_t i = 0; i < 16; ++i) dm(i, 0) = data[i];

    const oracle::Grid1D quad{-12.0, 12.0, 24'001};
    const oracle::Grid1D xs{-6.0, 6.0, 1'201};
    for (double sigma : {0.5, 0.2}) {
        const HomotopyParams p{omega, sigma, 1e-4, 1};
        for (double t : {0.1, 0.5, 0.9}) {
            const double h = 1e-4;
            const oracle::MarginalQuadrature1D up(omega, sigma, data, t + h, quad);
            const oracle::MarginalQuadrature1D down(omega, sigma, data, t - h, quad);
            Vec fd(xs.n), rhs(xs.n);
            for (std::size_t i = 0; i < xs.n; ++i) {
                const double x = xs.at(i);
                fd[i] = (up.density(x) - down.density(x)) / (2.0 * h);
                rhs[i] = marginal_homotopy_dt(p, dm, Vec{x}, t);
            }
            const std::string tag = detail::fmt("sigma=%g,t=%g", sigma, t);
            out.push_back(detail::at_most("homotopy", "pde_rhs[" + tag + "]",
                                          oracle::normwise_relative_error(rhs, fd), 1e-5));

            // Mass conservation on a wide fine grid.
            const oracle::Grid1D wide{-12.0, 12.0, 48'001};
            std::vector<double> f(wide.n);
            for (std::size_t i = 0; i < wide.n; ++i) f[i] = marginal_homotopy_dt(p, dm, Vec{wide.at(i)}, t);
            out.push_back(detail::at_most("homotopy", "pde_mass[" + tag + "]",
                                          std::abs(oracle::trapezoid(f, wide.step())), 1e-6));
        }
    }
    return out;
}

/// Log-uniform time law: KS statistic of 1e5 draws against the reciprocal CDF.
inline Report time_law(std::size_t draws = 100'000) {
    Report out;
    for (double eps : {1e-4, 0.5}) {
        const HomotopyParams p{1.0, 0.01, eps, 1};
        RngStream rng(7);
        std::vector<double> ts(draws);
        for (double& t : ts) t = sample_time(p, rng.uniform());
        const double ks = oracle::ks_statistic(ts, [eps](double t) { return oracle::reciprocal_cdf(t, eps); });
        out.push_back(detail::at_most("time", detail::fmt("ks[eps=%g]", eps), ks, oracle::ks_critical_1pct(draws)));
    }
    return out;
}

namespace detail {

inline PotentialModel random_model(RngStream& rng, std::size_t dim, std::size_t hidden, Activation act) {
    std::vector<std::size_t> sizes{dim};
    for (std::size_t l = 0; l < hidden; ++l) sizes.push_back(2 + rng.next_u64() % 7);
    sizes.push_back(1);
    PotentialModel m(sizes, act);
    for (double& v : m.theta()) v = 0.8 * rng.normal();
    return m;
}

}  // namespace detail

/// Input gradient, parameter gradient and double-backprop gradient against
/// central finite differences on `configs` random networks (D <= 8, 1-3
/// hidden layers), then the full batch-loss gradient on random B = 8, D = 2
/// batches.
inline Report gradients(std::size_t configs = 100, double tol = 1e-4) {
    Report out;
    RngStream rng(99);
    double worst_in = 0.0, worst_val = 0.0, worst_gsq = 0.0;
    for (std::size_t c = 0; c < configs; ++c) {
        const std::size_t dim = 1 + rng.next_u64() % 8;
        const std::size_t hidden = 1 + rng.next_u64() % 3;
        PotentialModel m = detail::random_model(rng, dim, hidden, c % 2 ? Activation::tanh : Activation::gelu);
        Vec x(dim);
        for (double& v : x) v = rng.normal();

        const EvalRecord rec = forward(m, x);
        Vec fd_in(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            Vec xp = x, xm = x;
            xp[d] += 1e-5;
            xm[d] -= 1e-5;
            fd_in[d] = (m.value(xp) - m.value(xm)) / 2e-5;
        }
        worst_in = std::max(worst_in, oracle::normwise_relative_error(rec.input_grad, fd_in));

        auto& th = m.theta();
        const Vec g_val = grad_theta_value(m, x);
        const Vec fd_val = oracle::numeric_gradient([&] { return m.value(x); }, th, 1e-5);
        worst_val = std::max(worst_val, oracle::normwise_relative_error(g_val, fd_val));

        const Vec g_gsq = grad_theta_gradnormsq(m, x);
        const Vec fd_gsq = oracle::numeric_gradient(
            [&] {
                Vec g(dim);
                m.gradient(x, g);
                return vapo::detail::squared_norm(g);
            },
            th, 1e-5);
        worst_gsq = std::max(worst_gsq, oracle::normwise_relative_error(g_gsq, fd_gsq));
    }
    out.push_back(detail::at_most("gradients", "input_grad", worst_in, tol));
    out.push_back(detail::at_most("gradients", "grad_theta_value", worst_val, tol));
    out.push_back(detail::at_most("gradients", "grad_theta_gradnormsq", worst_gsq, tol));

    double worst_loss = 0.0;
    for (std::size_t c = 0; c < 20; ++c) {
        PotentialModel m = detail::random_model(rng, 2, 2, c % 2 ? Activation::tanh : Activation::gelu);
        const HomotopyParams p{1.0, 0.5, 0.1, 2};
        std::vector<Vec> batch(8, Vec(2));
        for (auto& xb : batch)
            for (double& v : xb) v = rng.normal();
        const auto samples = draw_loss_samples(p, batch, rng);
        Vec g(m.num_params());
        evaluate_loss(m, p, 1e-2, samples, g);
        const Vec fd = oracle::numeric_gradient([&] { return evaluate_loss(m, p, 1e-2, samples).total; },
                                                m.theta(), 1e-5);
        worst_loss = std::max(worst_loss, oracle::normwise_relative_error(g, fd));
    }
    out.push_back(detail::at_most("gradients", "batch_loss", worst_loss, tol));
    return out;
}

/// Phi(x) = -1/2 |x|^2, whose flow is x(t) = x0 exp(-t).
struct QuadraticPotential {
    std::size_t d = 2;
    std::size_t dim() const { return d; }
    double value(ConstVecView x) const { return -0.5 * vapo::detail::squared_norm(x); }
    void gradient(ConstVecView x, std::span<double> g) const {
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = -x[i];
    }
};

/// Closed-form flow, RK4 convergence order and energy ascent along trajectories.
inline Report ode() {
    Report out;
    const QuadraticPotential quad{3};
    const Vec x0{1.0, -2.0, 0.5};
    const double decay = std::exp(-1.625);

    OdeConfig cfg;  // defaults: t_end 1.625, rtol 1e-5, atol 1e-6, rk45
    const OdeResult r = integrate(quad, x0, cfg);
    double err = 0.0, scale = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
        err = std::max(err, std::abs(r.x[d] - x0[d] * decay));
        scale = std::max(scale, std::abs(x0[d] * decay));
    }
    out.push_back(detail::at_most("ode", "rk45_closed_form", err / scale, 10.0 * cfg.rtol));

    auto rk4_error = [&](double h) {
        OdeConfig c;
        c.method = OdeMethod::rk4_fixed;
        c.fixed_step = h;
        const OdeResult rr = integrate(quad, x0, c);
        double e = 0.0;
        for (std::size_t d = 0; d < 3; ++d) e = std::max(e, std::abs(rr.x[d] - x0[d] * decay));
        return e;
    };
    const double ratio = rk4_error(0.1625) / rk4_error(0.08125);
    out.push_back({"ode", "rk4_order_ratio", ratio, 16.0, ratio >= 12.0 && ratio <= 20.0});

    // Energy ascent along trajectories of random networks.
    RngStream rng(5);
    double worst_drop = 0.0;
    for (std::size_t c = 0; c < 10; ++c) {
        PotentialModel m = detail::random_model(rng, 2, 2, Activation::gelu);
        Vec start{rng.normal(), rng.normal()};
        double prev = m.value(start);
        integrate(m, start, cfg, [&](double, ConstVecView x) {
            const double v = m.value(x);
            worst_drop = std::max(worst_drop, prev - v);
            prev = v;
        });
    }
    out.push_back(detail::at_most("ode", "energy_ascent_drop", worst_drop, 10.0 * cfg.atol));
    return out;
}

inline Report run_suite(const std::string& name) {
    Report r;
    auto append = [&](Report part) { r.insert(r.end(), part.begin(), part.end()); };
    if (name == "homotopy" || name == "all") {
        append(homotopy_quadrature());
        append(homotopy_pde());
        append(time_law());
    }
    if (name == "gradients" || name == "all") append(gradients());
    if (name == "ode" || name == "all") append(ode());
    if (r.empty()) throw DomainError("unknown verify suite '" + name + "'");
    return r;
}

}  // namespace vapo::verify

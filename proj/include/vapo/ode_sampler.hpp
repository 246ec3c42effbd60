#pragma once

// Generation by integrating the potential flow dx/dt = grad Phi(x) from prior
// draws over [0, t_end].

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vapo/common.hpp"
#include "vapo/homotopy.hpp"
#include "vapo/parallel.hpp"
#include "vapo/potential_net.hpp"
#include "vapo/rng.hpp"

namespace vapo {

enum class OdeMethod { rk45_adaptive, rk4_fixed, euler_fixed };

inline std::string to_string(OdeMethod m) {
    switch (m) {
        case OdeMethod::rk45_adaptive: return "rk45_adaptive";
        case OdeMethod::rk4_fixed: return "rk4_fixed";
        case OdeMethod::euler_fixed: return "euler_fixed";
    }
    return "?";
}

inline OdeMethod ode_method_from_string(const std::string& s) {
    if (s == "rk45_adaptive" || s == "rk45") return OdeMethod::rk45_adaptive;
    if (s == "rk4_fixed" || s == "rk4") return OdeMethod::rk4_fixed;
    if (s == "euler_fixed" || s == "euler") return OdeMethod::euler_fixed;
    throw DomainError("unknown ODE method '" + s + "'");
}

struct OdeConfig {
    double t_end = 1.625;
    double rtol = 1e-5;
    double atol = 1e-6;
    std::size_t max_steps = 10'000;
    OdeMethod method = OdeMethod::rk45_adaptive;
    double fixed_step = 1e-2;

    void validate() const {
        if (!(t_end > 0.0)) throw DomainError("OdeConfig: t_end must be > 0");
        if (!(rtol > 0.0) || !(atol > 0.0)) throw DomainError("OdeConfig: tolerances must be > 0");
        if (max_steps == 0) throw DomainError("OdeConfig: max_steps must be > 0");
        if (method != OdeMethod::rk45_adaptive && !(fixed_step > 0.0 && fixed_step <= t_end)) {
            throw DomainError("OdeConfig: fixed_step must lie in (0, t_end]");
        }
    }
};

struct OdeStats {
    std::size_t steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t f_evals = 0;
};

struct OdeResult {
    Vec x;
    OdeStats stats;
};

/// Called after every accepted step with (t, x).
using StepObserver = std::function<void(double, ConstVecView)>;

namespace detail {

// Dormand-Prince 5(4) tableau.
namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
// Difference between the 5th- and embedded 4th-order weights.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

inline void check_finite_state(ConstVecView x, double t) {
    if (!all_finite(x)) {
        throw NumericalError("non-finite state at t = " + std::to_string(t) + " (exploding potential field)");
    }
}

template <PotentialField F>
OdeResult integrate_fixed(const F& field, Vec x, const OdeConfig& cfg, const StepObserver& observe) {
    const std::size_t dim = x.size();
    OdeResult res;
    Vec k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.fixed_step - 1e-9));
    if (steps > cfg.max_steps) throw NumericalError("integrate: step budget exhausted");
    double t = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
        const double h = std::min(cfg.fixed_step, cfg.t_end - t);
        field.gradient(x, k1);
        if (cfg.method == OdeMethod::euler_fixed) {
            for (std::size_t d = 0; d < dim; ++d) x[d] += h * k1[d];
            res.stats.f_evals += 1;
        } else {
            for (std::size_t d = 0; d < dim; ++d) tmp[d] = x[d] + 0.5 * h * k1[d];
            field.gradient(tmp, k2);
            for (std::size_t d = 0; d < dim; ++d) tmp[d] = x[d] + 0.5 * h * k2[d];
            field.gradient(tmp, k3);
            for (std::size_t d = 0; d < dim; ++d) tmp[d] = x[d] + h * k3[d];
            field.gradient(tmp, k4);
            for (std::size_t d = 0; d < dim; ++d) x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            res.stats.f_evals += 4;
        }
        t = (s + 1 == steps) ? cfg.t_end : t + h;
        check_finite_state(x, t);
        ++res.stats.steps;
        if (observe) observe(t, x);
    }
    res.x = std::move(x);
    return res;
}

template <PotentialField F>
OdeResult integrate_dopri5(const F& field, Vec x, const OdeConfig& cfg, const StepObserver& observe) {
    using namespace dp;
    const std::size_t dim = x.size();
    OdeResult res;
    Vec k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), y(dim), xn(dim);

    auto scaled_norm = [&](const Vec& v, const Vec& a, const Vec& b) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double sc = cfg.atol + cfg.rtol * std::max(std::abs(a[d]), std::abs(b[d]));
            s += (v[d] / sc) * (v[d] / sc);
        }
        return std::sqrt(s / static_cast<double>(dim));
    };

    field.gradient(x, k1);
    res.stats.f_evals = 1;

    // Starting step size (Hairer, Norsett & Wanner, II.4).
    double h;
    {
        const double d0 = scaled_norm(x, x, x);
        const double d1 = scaled_norm(k1, x, x);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, cfg.t_end);
        for (std::size_t d = 0; d < dim; ++d) y[d] = x[d] + h0 * k1[d];
        field.gradient(y, k2);
        ++res.stats.f_evals;
        Vec diff(dim);
        for (std::size_t d = 0; d < dim; ++d) diff[d] = (k2[d] - k1[d]) / h0;
        const double d2 = scaled_norm(diff, x, x);
        const double dmax = std::max(d1, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        h = std::min({100.0 * h0, h1, cfg.t_end});
    }

    constexpr double safety = 0.9, fac_min = 0.2, fac_max = 10.0;
    double t = 0.0;
    std::size_t attempts = 0;
    while (t < cfg.t_end) {
        if (++attempts > cfg.max_steps) throw NumericalError("integrate: step budget exhausted");
        bool last = false;
        if (t + h >= cfg.t_end) {
            h = cfg.t_end - t;
            last = true;
        }
        for (std::size_t d = 0; d < dim; ++d) y[d] = x[d] + h * a21 * k1[d];
        field.gradient(y, k2);
        for (std::size_t d = 0; d < dim; ++d) y[d] = x[d] + h * (a31 * k1[d] + a32 * k2[d]);
        field.gradient(y, k3);
        for (std::size_t d = 0; d < dim; ++d) y[d] = x[d] + h * (a41 * k1[d] + a42 * k2[d] + a43 * k3[d]);
        field.gradient(y, k4);
        for (std::size_t d = 0; d < dim; ++d)
            y[d] = x[d] + h * (a51 * k1[d] + a52 * k2[d] + a53 * k3[d] + a54 * k4[d]);
        field.gradient(y, k5);
        for (std::size_t d = 0; d < dim; ++d)
            y[d] = x[d] + h * (a61 * k1[d] + a62 * k2[d] + a63 * k3[d] + a64 * k4[d] + a65 * k5[d]);
        field.gradient(y, k6);
        for (std::size_t d = 0; d < dim; ++d)
            xn[d] = x[d] + h * (a71 * k1[d] + a73 * k3[d] + a74 * k4[d] + a75 * k5[d] + a76 * k6[d]);
        field.gradient(xn, k7);
        res.stats.f_evals += 6;

        Vec err(dim);
        for (std::size_t d = 0; d < dim; ++d)
            err[d] = h * (e1 * k1[d] + e3 * k3[d] + e4 * k4[d] + e5 * k5[d] + e6 * k6[d] + e7 * k7[d]);
        const double en = scaled_norm(err, x, xn);
        if (!std::isfinite(en)) check_finite_state(xn, t + h);

        if (en <= 1.0) {
            t = last ? cfg.t_end : t + h;
            x.swap(xn);
            k1.swap(k7);
            check_finite_state(x, t);
            ++res.stats.steps;
            if (observe) observe(t, x);
            const double fac = en == 0.0 ? fac_max : std::clamp(safety * std::pow(en, -0.2), fac_min, fac_max);
            h *= fac;
        } else {
            ++res.stats.rejected_steps;
            h *= std::max(fac_min, safety * std::pow(en, -0.2));
        }
        if (h < 1e-14 * std::max(1.0, t)) throw NumericalError("integrate: step size underflow");
    }
    res.x = std::move(x);
    return res;
}

}  // namespace detail

/// Approximates the flow map of dx/dt = grad Phi(x) at cfg.t_end.
template <PotentialField F>
OdeResult integrate(const F& field, ConstVecView x0, const OdeConfig& cfg, const StepObserver& observe = {}) {
    cfg.validate();
    detail::require_same_dim(x0.size(), field.dim(), "integrate");
    if (!detail::all_finite(x0)) throw DomainError("integrate: non-finite initial state");
    Vec x(x0.begin(), x0.end());
    if (cfg.method == OdeMethod::rk45_adaptive) return detail::integrate_dopri5(field, std::move(x), cfg, observe);
    return detail::integrate_fixed(field, std::move(x), cfg, observe);
}

/// n draws from N(0, omega^2 I), consumed from `rng` in row order.
inline std::vector<Vec> draw_prior(std::size_t n, const HomotopyParams& params, RngStream& rng) {
    std::vector<Vec> out(n, Vec(params.dim));
    for (Vec& x : out) {
        for (double& v : x) v = params.omega * rng.normal();
    }
    return out;
}

/// Integrates each starting point; trajectories are independent.
template <PotentialField F>
std::vector<Vec> integrate_all(const F& field, const std::vector<Vec>& starts, const OdeConfig& cfg) {
    std::vector<Vec> out(starts.size());
    const std::size_t chunks = std::min<std::size_t>(starts.size(), 64);
    parallel_chunks(chunks, [&](std::size_t c) {
        const std::size_t lo = c * starts.size() / chunks, hi = (c + 1) * starts.size() / chunks;
        for (std::size_t i = lo; i < hi; ++i) out[i] = integrate(field, starts[i], cfg).x;
    });
    return out;
}

template <PotentialField F>
std::vector<Vec> sample(const F& field, std::size_t n, const HomotopyParams& params, const OdeConfig& cfg,
                        RngStream& rng) {
    params.validate();
    detail::require_same_dim(field.dim(), params.dim, "sample");
    cfg.validate();
    return integrate_all(field, draw_prior(n, params, rng), cfg);
}

/// Spherical interpolation between two nonzero latent points.
inline Vec slerp(ConstVecView a, ConstVecView b, double alpha) {
    detail::require_same_dim(a.size(), b.size(), "slerp");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("slerp: alpha must lie in [0, 1]");
    const double na = std::sqrt(detail::squared_norm(a));
    const double nb = std::sqrt(detail::squared_norm(b));
    if (na == 0.0 || nb == 0.0) throw DomainError("slerp: zero-norm endpoint");
    double c = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) c += a[d] * b[d];
    c = std::clamp(c / (na * nb), -1.0, 1.0);
    const double phi = std::acos(c);
    double wa, wb;
    if (phi < 1e-6) {
        wa = 1.0 - alpha;
        wb = alpha;
    } else {
        const double s = std::sin(phi);
        wa = std::sin((1.0 - alpha) * phi) / s;
        wb = std::sin(alpha * phi) / s;
    }
    Vec out(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) out[d] = wa * a[d] + wb * b[d];
    return out;
}

/// Integrated images of slerp(a, b, j / (k - 1)) for j = 0..k-1.
template <PotentialField F>
std::vector<Vec> interpolate(const F& field, ConstVecView a, ConstVecView b, std::size_t k, const OdeConfig& cfg) {
    if (k < 2) throw DomainError("interpolate: need at least 2 points");
    std::vector<Vec> path;
    path.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        // exact endpoints so they agree bitwise with integrate(a), integrate(b)
        if (j == 0) path.emplace_back(a.begin(), a.end());
        else if (j + 1 == k) path.emplace_back(b.begin(), b.end());
        else path.push_back(slerp(a, b, static_cast<double>(j) / static_cast<double>(k - 1)));
    }
    return integrate_all(field, path, cfg);
}

}  // namespace vapo

#pragma once

// Conditional and marginal data-likelihood homotopies under a Gaussian prior
// q(x) = N(0, omega^2 I) and Gaussian likelihood p(xbar | x) = N(xbar; x, sigma^2 I).
//
// The conditional homotopy rho(x; xbar, t) ∝ q(x) p(xbar | x)^t is Gaussian with
//   var(t)  = 1 / (1/omega^2 + t/sigma^2)
//   mean(t) = t * var(t) / sigma^2 * xbar
// and interpolates between the prior (t = 0) and the posterior p(x | xbar) (t = 1).

#include <cmath>
#include <numbers>
#include <span>

#include "vapo/common.hpp"

namespace vapo {

struct HomotopyParams {
    double omega = 1.0;       ///< prior standard deviation
    double sigma = 0.01;      ///< likelihood standard deviation
    double eps_sharp = 1e-4;  ///< sharpness of the log-uniform time law
    std::size_t dim = 1;

    void validate() const {
        if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("omega must be > 0");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be > 0");
        if (!(eps_sharp > 0.0 && eps_sharp < 1.0)) throw DomainError("eps_sharp must lie in (0, 1)");
        if (dim < 1) throw DomainError("dim must be >= 1");
    }
};

struct CondStats {
    Vec mean;
    double var = 0.0;  ///< scalar diagonal entry of the covariance
    double t = 0.0;
};

namespace detail {

inline void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("homotopy time must lie in [0, 1]");
}

}  // namespace detail

/// Diagonal entry of Σ(t). Non-increasing in t.
inline double cond_variance(const HomotopyParams& p, double t) {
    p.validate();
    detail::check_time(t);
    return 1.0 / (1.0 / (p.omega * p.omega) + t / (p.sigma * p.sigma));
}

inline CondStats cond_stats(const HomotopyParams& p, ConstVecView xbar, double t) {
    const double var = cond_variance(p, t);
    detail::require_same_dim(xbar.size(), p.dim, "cond_stats");
    if (!detail::all_finite(xbar)) throw DomainError("cond_stats: non-finite datum");
    const double gain = t * var / (p.sigma * p.sigma);
    CondStats s{Vec(xbar.size()), var, t};
    for (std::size_t d = 0; d < xbar.size(); ++d) s.mean[d] = gain * xbar[d];
    return s;
}

/// Reparameterized draw x = mean + sqrt(var) * noise, noise supplied by the caller.
inline Vec sample_cond(const HomotopyParams& p, ConstVecView xbar, double t, ConstVecView noise) {
    detail::require_same_dim(noise.size(), xbar.size(), "sample_cond");
    CondStats s = cond_stats(p, xbar, t);
    const double sd = std::sqrt(s.var);
    for (std::size_t d = 0; d < noise.size(); ++d) s.mean[d] += sd * noise[d];
    return std::move(s.mean);
}

/// Precision-weighted squared residual (x - xbar)^T Π^{-1} (x - xbar).
inline double innovation(const HomotopyParams& p, ConstVecView x, ConstVecView xbar) {
    detail::require_same_dim(x.size(), xbar.size(), "innovation");
    double s = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double r = x[d] - xbar[d];
        s += r * r;
    }
    return s / (p.sigma * p.sigma);
}

/// Exact expectation of the innovation under rho(x; xbar, t):
/// D var(t) / sigma^2 + ||mean(t) - xbar||^2 / sigma^2.
inline double innovation_cond_mean(const HomotopyParams& p, ConstVecView xbar, double t) {
    const CondStats s = cond_stats(p, xbar, t);
    const double s2 = p.sigma * p.sigma;
    double bias = 0.0;
    for (std::size_t d = 0; d < xbar.size(); ++d) {
        const double r = s.mean[d] - xbar[d];
        bias += r * r;
    }
    return static_cast<double>(xbar.size()) * s.var / s2 + bias / s2;
}

/// Maps a uniform draw u to a homotopy time whose shift t + eps is
/// log-uniform on [eps, 1 + eps].
inline double sample_time(const HomotopyParams& p, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("sample_time: u must lie in [0, 1]");
    const double lo = std::log(p.eps_sharp);
    const double hi = std::log1p(p.eps_sharp);
    const double t = std::exp(lo + u * (hi - lo)) - p.eps_sharp;
    return std::clamp(t, 0.0, 1.0);
}

/// CDF of the homotopy time produced by sample_time.
inline double time_cdf(const HomotopyParams& p, double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double e = p.eps_sharp;
    return (std::log(t + e) - std::log(e)) / (std::log1p(e) - std::log(e));
}

inline double cond_log_density(const HomotopyParams& p, ConstVecView x, ConstVecView xbar, double t) {
    detail::require_same_dim(x.size(), xbar.size(), "cond_log_density");
    const CondStats s = cond_stats(p, xbar, t);
    double q = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double r = x[d] - s.mean[d];
        q += r * r;
    }
    const double dim = static_cast<double>(x.size());
    return -0.5 * dim * std::log(2.0 * std::numbers::pi * s.var) - 0.5 * q / s.var;
}

/// Marginal homotopy rho_bar(x; t) with p_data uniform over the rows of `data`.
inline double marginal_density(const HomotopyParams& p, const Matrix& data, ConstVecView x, double t) {
    if (data.rows == 0) throw DomainError("marginal_density: empty dataset");
    detail::require_same_dim(data.cols, x.size(), "marginal_density");
    double acc = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) acc += std::exp(cond_log_density(p, x, data.row(i), t));
    return acc / static_cast<double>(data.rows);
}

/// Right-hand side of the homotopy evolution PDE,
///   d rho_bar / dt = -1/2 E_pdata[ rho(x; xbar, t) (gamma(x, xbar) - gamma_bar(xbar, t)) ],
/// with p_data uniform over `data`. Intended for low-dimensional checks.
inline double marginal_homotopy_dt(const HomotopyParams& p, const Matrix& data, ConstVecView x, double t) {
    if (data.rows == 0) throw DomainError("marginal_homotopy_dt: empty dataset");
    detail::require_same_dim(data.cols, x.size(), "marginal_homotopy_dt");
    double acc = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        const auto xbar = data.row(i);
        const double rho = std::exp(cond_log_density(p, x, xbar, t));
        acc += rho * (innovation(p, x, xbar) - innovation_cond_mean(p, xbar, t));
    }
    return -0.5 * acc / static_cast<double>(data.rows);
}

}  // namespace vapo

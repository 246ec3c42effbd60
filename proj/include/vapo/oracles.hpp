#pragma once

// Independent numerical references used by the verification suites. Nothing
// here goes through the closed-form homotopy statistics or the analytic
// network derivatives.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "vapo/common.hpp"

namespace vapo::oracle {

/// Uniform grid on [lo, hi] with n points.
struct Grid1D {
    double lo = -10.0;
    double hi = 10.0;
    std::size_t n = 100'001;

    double at(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1); }
    double step() const { return (hi - lo) / static_cast<double>(n - 1); }
};

inline double trapezoid(const std::vector<double>& f, double h) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

/// 1-D Bayes homotopy by brute-force quadrature: the unnormalized log density
/// log q(x) + t log p(xbar | x) normalized on a grid.
class BayesQuadrature1D {
  public:
    BayesQuadrature1D(double omega, double sigma, double xbar, double t, Grid1D grid = {})
        : omega_(omega), sigma_(sigma), xbar_(xbar), t_(t), grid_(grid) {
        std::vector<double> f(grid_.n);
        double fmax = -INFINITY;
        for (std::size_t i = 0; i < grid_.n; ++i) {
            f[i] = log_unnormalized(grid_.at(i));
            fmax = std::max(fmax, f[i]);
        }
        std::vector<double> w(grid_.n), wx(grid_.n);
        for (std::size_t i = 0; i < grid_.n; ++i) {
            w[i] = std::exp(f[i] - fmax);
            wx[i] = w[i] * grid_.at(i);
        }
        const double z = trapezoid(w, grid_.step());
        log_z_ = fmax + std::log(z);
        mean_ = trapezoid(wx, grid_.step()) / z;
        for (std::size_t i = 0; i < grid_.n; ++i) {
            const double r = grid_.at(i) - mean_;
            wx[i] = w[i] * r * r;
        }
        var_ = trapezoid(wx, grid_.step()) / z;
    }

    double log_unnormalized(double x) const {
        const double log_q = -0.5 * std::log(2.0 * std::numbers::pi * omega_ * omega_) - 0.5 * x * x / (omega_ * omega_);
        const double r = xbar_ - x;
        const double log_lik =
            -0.5 * std::log(2.0 * std::numbers::pi * sigma_ * sigma_) - 0.5 * r * r / (sigma_ * sigma_);
        return log_q + t_ * log_lik;
    }

    double log_density(double x) const { return log_unnormalized(x) - log_z_; }
    double density(double x) const { return std::exp(log_density(x)); }
    double mean() const { return mean_; }
    double var() const { return var_; }

  private:
    double omega_, sigma_, xbar_, t_;
    Grid1D grid_;
    double log_z_ = 0.0, mean_ = 0.0, var_ = 0.0;
};

/// Marginal homotopy density in 1-D: the average of quadrature-normalized
/// conditionals over an empirical dataset.
class MarginalQuadrature1D {
  public:
    MarginalQuadrature1D(double omega, double sigma, const std::vector<double>& data, double t, Grid1D grid = {}) {
        for (double xbar : data) parts_.emplace_back(omega, sigma, xbar, t, grid);
    }

    double density(double x) const {
        double acc = 0.0;
        for (const auto& p : parts_) acc += p.density(x);
        return acc / static_cast<double>(parts_.size());
    }

  private:
    std::vector<BayesQuadrature1D> parts_;
};

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Central-difference gradient of f over every coordinate of `params`
/// (restored afterwards).
inline Vec numeric_gradient(const std::function<double()>& f, std::vector<double>& params, double h) {
    Vec g(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + h;
        const double up = f();
        params[k] = keep - h;
        const double down = f();
        params[k] = keep;
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max_k |a_k - b_k| / max(max_k |b_k|, floor).
inline double normwise_relative_error(ConstVecView a, ConstVecView b, double floor = 1e-12) {
    double err = 0.0, scale = floor;
    for (std::size_t k = 0; k < a.size(); ++k) {
        err = std::max(err, std::abs(a[k] - b[k]));
        scale = std::max(scale, std::abs(b[k]));
    }
    return err / scale;
}

/// CDF of the reciprocal law of s = t + eps on [eps, 1 + eps], expressed in t.
inline double reciprocal_cdf(double t, double eps) {
    const double s = std::clamp(t + eps, eps, 1.0 + eps);
    return std::log(s / eps) / std::log((1.0 + eps) / eps);
}

/// One-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic one-sample KS critical value at level 1%.
inline double ks_critical_1pct(std::size_t n) { return 1.62762 / std::sqrt(static_cast<double>(n)); }

}  // namespace vapo::oracle

#pragma once

// Energy loss for one minibatch:
//   total = 1/2 (cov + gradsq + lambda * l2)
//   cov    = mean_i Phi(x_i) (gamma(x_i, xbar_i) - gamma_bar(xbar_i, t_i))
//   gradsq = mean_i ||grad_x Phi(x_i)||^2
//   l2     = mean_i Phi(x_i)^2
// with one (t_i, x_i) draw per datum. gamma_bar is the analytic conditional
// mean of the innovation, so the covariance is centered per sample.

#include <span>
#include <utility>
#include <vector>

#include "vapo/common.hpp"
#include "vapo/homotopy.hpp"
#include "vapo/parallel.hpp"
#include "vapo/potential_net.hpp"
#include "vapo/rng.hpp"

namespace vapo {

struct LossBreakdown {
    double cov_term = 0.0;
    double gradsq_term = 0.0;
    double l2_term = 0.0;
    double total = 0.0;
    double lambda = 0.0;
    std::size_t batch_size = 0;
};

/// One drawn point of the conditional homotopy.
struct LossSample {
    Vec xbar;
    double t = 0.0;
    Vec x;
};

struct CovTerm {
    double phi = 0.0;
    double gamma = 0.0;
    double gamma_bar = 0.0;
};

inline double cov_estimator_centered(std::span<const CovTerm> values) {
    if (values.empty()) throw DomainError("cov_estimator_centered: empty input");
    double s = 0.0;
    for (const CovTerm& v : values) s += v.phi * (v.gamma - v.gamma_bar);
    return s / static_cast<double>(values.size());
}

/// Per datum: u ~ U[0,1) then D standard normals, in that order.
inline std::vector<LossSample> draw_loss_samples(const HomotopyParams& params, const std::vector<Vec>& batch,
                                                 RngStream& rng) {
    std::vector<LossSample> out;
    out.reserve(batch.size());
    Vec noise(params.dim);
    for (const Vec& xbar : batch) {
        detail::require_same_dim(xbar.size(), params.dim, "draw_loss_samples");
        const double t = sample_time(params, rng.uniform());
        for (double& e : noise) e = rng.normal();
        out.push_back({xbar, t, sample_cond(params, xbar, t, noise)});
    }
    return out;
}

/// Loss and (optionally) its exact parameter gradient on already-drawn samples.
inline LossBreakdown evaluate_loss(const PotentialModel& model, const HomotopyParams& params, double lambda,
                                   std::span<const LossSample> samples, std::span<double> grad = {}) {
    if (samples.empty()) throw DomainError("batch_loss: empty batch");
    detail::require_same_dim(model.dim(), params.dim, "batch_loss");
    if (!(lambda > 0.0)) throw DomainError("batch_loss: lambda must be > 0");
    const bool want_grad = !grad.empty();
    if (want_grad) detail::require_same_dim(grad.size(), model.num_params(), "batch_loss gradient");

    const std::size_t n = samples.size();
    const std::size_t chunks = std::min<std::size_t>(n, 16);
    const double inv2n = 0.5 / static_cast<double>(n);
    struct Partial {
        double cov = 0.0, gradsq = 0.0, l2 = 0.0;
        Vec grad;
    };
    std::vector<Partial> partials(chunks);

    parallel_chunks(chunks, [&](std::size_t c) {
        Partial& p = partials[c];
        if (want_grad) p.grad.assign(model.num_params(), 0.0);
        const std::size_t lo = c * n / chunks, hi = (c + 1) * n / chunks;
        for (std::size_t i = lo; i < hi; ++i) {
            const LossSample& s = samples[i];
            detail::require_same_dim(s.x.size(), params.dim, "batch_loss");
            const EvalRecord rec = forward(model, s.x);
            const double centered = innovation(params, s.x, s.xbar) - innovation_cond_mean(params, s.xbar, s.t);
            p.cov += rec.value * centered;
            p.gradsq += detail::squared_norm(rec.input_grad);
            p.l2 += rec.value * rec.value;
            if (want_grad) {
                accumulate_param_grad(model, rec, (centered + 2.0 * lambda * rec.value) * inv2n, inv2n, p.grad);
            }
        }
    });

    LossBreakdown out;
    out.lambda = lambda;
    out.batch_size = n;
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    for (const Partial& p : partials) {
        out.cov_term += p.cov;
        out.gradsq_term += p.gradsq;
        out.l2_term += p.l2;
        if (want_grad) {
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += p.grad[k];
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.cov_term *= inv;
    out.gradsq_term *= inv;
    out.l2_term *= inv;
    out.total = 0.5 * (out.cov_term + out.gradsq_term + lambda * out.l2_term);
    return out;
}

/// Draws (t_i, x_i) for each datum and returns the loss with its gradient.
inline std::pair<LossBreakdown, Vec> batch_loss(const PotentialModel& model, const HomotopyParams& params,
                                                double lambda, const std::vector<Vec>& batch, RngStream& rng) {
    if (batch.empty()) throw DomainError("batch_loss: empty batch");
    detail::require_same_dim(model.dim(), params.dim, "batch_loss");
    const auto samples = draw_loss_samples(params, batch, rng);
    Vec grad(model.num_params(), 0.0);
    LossBreakdown lb = evaluate_loss(model, params, lambda, samples, grad);
    return {lb, std::move(grad)};
}

}  // namespace vapo

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "vapo/common.hpp"

namespace vapo {

enum class OptimizerKind { adam, sgd_momentum };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw DomainError("unknown optimizer '" + s + "'");
}

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    std::optional<double> grad_clip;
    double weight_decay = 0.0;  ///< plain L2 coefficient added to the gradient
};

struct OptimizerState {
    Vec m;  ///< first moment (Adam) or momentum buffer (SGD)
    Vec v;  ///< second moment (Adam only)
    std::size_t t = 0;

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kSgdMomentum = 0.9;

/// Rescales g in place so its Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_global_norm(std::span<double> g, double max_norm) {
    const double norm = std::sqrt(detail::squared_norm(g));
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (double& x : g) x *= s;
    }
    return norm;
}

/// One update of theta from grad. `grad` is consumed (weight decay and
/// clipping are applied to it in place).
inline void optimizer_step(OptimizerState& st, std::span<double> theta, std::span<double> grad,
                           const OptimizerSettings& cfg) {
    detail::require_same_dim(theta.size(), grad.size(), "optimizer_step");
    if (st.m.empty()) st.m.assign(theta.size(), 0.0);
    if (cfg.kind == OptimizerKind::adam && st.v.empty()) st.v.assign(theta.size(), 0.0);
    detail::require_same_dim(st.m.size(), theta.size(), "optimizer_step state");

    if (cfg.weight_decay != 0.0) {
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += cfg.weight_decay * theta[k];
    }
    if (cfg.grad_clip) clip_global_norm(grad, *cfg.grad_clip);

    ++st.t;
    if (cfg.kind == OptimizerKind::adam) {
        detail::require_same_dim(st.v.size(), theta.size(), "optimizer_step state");
        const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.t));
        const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.t));
        for (std::size_t k = 0; k < theta.size(); ++k) {
            st.m[k] = kAdamBeta1 * st.m[k] + (1.0 - kAdamBeta1) * grad[k];
            st.v[k] = kAdamBeta2 * st.v[k] + (1.0 - kAdamBeta2) * grad[k] * grad[k];
            const double mhat = st.m[k] / bc1;
            const double vhat = st.v[k] / bc2;
            theta[k] -= cfg.lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    } else {
        for (std::size_t k = 0; k < theta.size(); ++k) {
            st.m[k] = kSgdMomentum * st.m[k] + grad[k];
            theta[k] -= cfg.lr * st.m[k];
        }
    }
}

}  // namespace vapo

#pragma once

// Scalar potential-energy network Phi_theta : R^D -> R.
//
// A plain MLP with C^2 activations and a linear scalar output layer. Besides the
// value, the network provides its exact input gradient (the flow field), the
// parameter gradient of the value, and the parameter gradient of the squared
// input-gradient norm (double backprop, done as forward-over-reverse).
//
// Parameter layout, for each layer in order: weights (out x in, row-major)
// followed by biases (out).

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "vapo/common.hpp"
#include "vapo/rng.hpp"

namespace vapo {

enum class Activation : std::uint32_t { gelu = 0, tanh = 1 };

inline std::string to_string(Activation a) { return a == Activation::gelu ? "gelu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::gelu;
    if (s == "tanh") return Activation::tanh;
    throw DomainError("unknown activation '" + s + "'");
}

namespace detail {

struct ActivationDerivs {
    double f, df, d2f;
};

inline ActivationDerivs activate(Activation a, double z) {
    if (a == Activation::tanh) {
        const double th = std::tanh(z);
        const double s = 1.0 - th * th;
        return {th, s, -2.0 * th * s};
    }
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    const double cdf = 0.5 * std::erfc(-z * inv_sqrt2);
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * z * z);
    return {z * cdf, cdf + z * pdf, pdf * (2.0 - z * z)};
}

}  // namespace detail

struct LayerLayout {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

struct EvalRecord;

class PotentialModel {
  public:
    PotentialModel() = default;

    /// Zero-parameter model with the given shape. `layer_sizes` is
    /// [D, h_1, ..., h_L, 1]; L = 0 gives an affine potential.
    PotentialModel(std::vector<std::size_t> layer_sizes, Activation act)
        : sizes_(std::move(layer_sizes)), act_(act) {
        if (sizes_.size() < 2) throw DomainError("PotentialModel: need at least input and output sizes");
        if (sizes_.back() != 1) throw DomainError("PotentialModel: output size must be 1");
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            if (sizes_[l] == 0) throw DomainError("PotentialModel: zero layer size");
            LayerLayout ly{sizes_[l], sizes_[l + 1], off, off + sizes_[l] * sizes_[l + 1]};
            off = ly.bias_offset + ly.out;
            layers_.push_back(ly);
        }
        theta_.assign(off, 0.0);
    }

    std::size_t dim() const { return sizes_.front(); }
    std::size_t num_params() const { return theta_.size(); }
    std::size_t hidden_layers() const { return layers_.size() - 1; }
    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    const std::vector<LayerLayout>& layers() const { return layers_; }
    Activation activation() const { return act_; }

    std::vector<double>& theta() { return theta_; }
    const std::vector<double>& theta() const { return theta_; }

    double value(ConstVecView x) const;
    void gradient(ConstVecView x, std::span<double> out) const;

    friend bool operator==(const PotentialModel& a, const PotentialModel& b) {
        return a.sizes_ == b.sizes_ && a.act_ == b.act_ && a.theta_ == b.theta_;
    }

  private:
    std::vector<std::size_t> sizes_;
    std::vector<LayerLayout> layers_;
    Activation act_ = Activation::gelu;
    std::vector<double> theta_;
};

/// Anything the flow can be driven by: a scalar value and its input gradient.
template <class F>
concept PotentialField = requires(const F& f, ConstVecView x, std::span<double> g) {
    { f.value(x) } -> std::convertible_to<double>;
    f.gradient(x, g);
    { f.dim() } -> std::convertible_to<std::size_t>;
};

/// Result of a forward pass. The cached activations are only meaningful for
/// the input that produced them.
struct EvalRecord {
    double value = 0.0;
    Vec input_grad;

    std::vector<Vec> pre;    // z_l per hidden layer
    std::vector<Vec> post;   // a_l per hidden layer
    std::vector<Vec> dact;   // f'(z_l)
    std::vector<Vec> d2act;  // f''(z_l)
    Vec input;               // a_0
};

inline EvalRecord forward(const PotentialModel& m, ConstVecView x) {
    detail::require_same_dim(x.size(), m.dim(), "forward");
    const auto& layers = m.layers();
    const double* th = m.theta().data();
    const std::size_t hidden = layers.size() - 1;

    EvalRecord r;
    r.input.assign(x.begin(), x.end());
    r.pre.resize(hidden);
    r.post.resize(hidden);
    r.dact.resize(hidden);
    r.d2act.resize(hidden);

    const Vec* prev = &r.input;
    for (std::size_t l = 0; l < hidden; ++l) {
        const LayerLayout& ly = layers[l];
        Vec& z = r.pre[l];
        Vec& a = r.post[l];
        z.resize(ly.out);
        a.resize(ly.out);
        r.dact[l].resize(ly.out);
        r.d2act[l].resize(ly.out);
        const double* w = th + ly.weight_offset;
        const double* b = th + ly.bias_offset;
        for (std::size_t o = 0; o < ly.out; ++o) {
            double s = b[o];
            const double* wr = w + o * ly.in;
            for (std::size_t i = 0; i < ly.in; ++i) s += wr[i] * (*prev)[i];
            const auto d = detail::activate(m.activation(), s);
            z[o] = s;
            a[o] = d.f;
            r.dact[l][o] = d.df;
            r.d2act[l][o] = d.d2f;
        }
        prev = &a;
    }

    const LayerLayout& last = layers.back();
    const double* wout = th + last.weight_offset;
    double v = th[last.bias_offset];
    for (std::size_t i = 0; i < last.in; ++i) v += wout[i] * (*prev)[i];
    r.value = v;

    // Reverse sweep for d value / d x.
    Vec g(wout, wout + last.in);
    for (std::size_t l = hidden; l-- > 0;) {
        const LayerLayout& ly = layers[l];
        const double* w = th + ly.weight_offset;
        Vec next(ly.in, 0.0);
        for (std::size_t o = 0; o < ly.out; ++o) {
            const double delta = g[o] * r.dact[l][o];
            const double* wr = w + o * ly.in;
            for (std::size_t i = 0; i < ly.in; ++i) next[i] += wr[i] * delta;
        }
        g = std::move(next);
    }
    r.input_grad = std::move(g);
    return r;
}

inline double PotentialModel::value(ConstVecView x) const { return forward(*this, x).value; }

inline void PotentialModel::gradient(ConstVecView x, std::span<double> out) const {
    const EvalRecord r = forward(*this, x);
    std::copy(r.input_grad.begin(), r.input_grad.end(), out.begin());
}

/// grad += value_weight * dPhi/dtheta + gradsq_weight * d||grad_x Phi||^2/dtheta,
/// evaluated at the input cached in `rec`.
inline void accumulate_param_grad(const PotentialModel& m, const EvalRecord& rec, double value_weight,
                                  double gradsq_weight, std::span<double> grad) {
    detail::require_same_dim(grad.size(), m.num_params(), "accumulate_param_grad");
    const auto& layers = m.layers();
    const double* th = m.theta().data();
    const std::size_t hidden = layers.size() - 1;
    const bool second = gradsq_weight != 0.0;

    // Tangent sweep along u = grad_x Phi: zdot_l = W_l adot_{l-1}, adot_l = f'(z_l) zdot_l.
    std::vector<Vec> zdot(hidden), adot(hidden);
    if (second) {
        const Vec* prev = &rec.input_grad;
        for (std::size_t l = 0; l < hidden; ++l) {
            const LayerLayout& ly = layers[l];
            const double* w = th + ly.weight_offset;
            zdot[l].resize(ly.out);
            adot[l].resize(ly.out);
            for (std::size_t o = 0; o < ly.out; ++o) {
                double s = 0.0;
                const double* wr = w + o * ly.in;
                for (std::size_t i = 0; i < ly.in; ++i) s += wr[i] * (*prev)[i];
                zdot[l][o] = s;
                adot[l][o] = rec.dact[l][o] * s;
            }
            prev = &adot[l];
        }
    }

    const LayerLayout& last = layers.back();
    const Vec& a_last = hidden ? rec.post[hidden - 1] : rec.input;
    const Vec& adot_last = hidden ? adot[hidden - 1] : rec.input_grad;
    const double* wout = th + last.weight_offset;
    for (std::size_t i = 0; i < last.in; ++i) {
        double g = value_weight * a_last[i];
        if (second) g += 2.0 * gradsq_weight * adot_last[i];
        grad[last.weight_offset + i] += g;
    }
    grad[last.bias_offset] += value_weight;

    // P: adjoint of adot_l, Q: adjoint of a_l.
    Vec P(last.in), Q(last.in);
    for (std::size_t i = 0; i < last.in; ++i) {
        P[i] = 2.0 * gradsq_weight * wout[i];
        Q[i] = value_weight * wout[i];
    }
    for (std::size_t l = hidden; l-- > 0;) {
        const LayerLayout& ly = layers[l];
        const double* w = th + ly.weight_offset;
        const Vec& a_prev = l ? rec.post[l - 1] : rec.input;
        const Vec* adot_prev = second ? (l ? &adot[l - 1] : &rec.input_grad) : nullptr;
        Vec nP(l ? ly.in : 0, 0.0), nQ(l ? ly.in : 0, 0.0);
        for (std::size_t o = 0; o < ly.out; ++o) {
            const double df = rec.dact[l][o];
            const double adj_zdot = second ? P[o] * df : 0.0;
            const double adj_z = Q[o] * df + (second ? P[o] * rec.d2act[l][o] * zdot[l][o] : 0.0);
            double* gw = grad.data() + ly.weight_offset + o * ly.in;
            const double* wr = w + o * ly.in;
            for (std::size_t i = 0; i < ly.in; ++i) {
                gw[i] += adj_z * a_prev[i];
                if (second) gw[i] += adj_zdot * (*adot_prev)[i];
            }
            grad[ly.bias_offset + o] += adj_z;
            if (l) {
                for (std::size_t i = 0; i < ly.in; ++i) {
                    nQ[i] += wr[i] * adj_z;
                    nP[i] += wr[i] * adj_zdot;
                }
            }
        }
        P = std::move(nP);
        Q = std::move(nQ);
    }
}

inline Vec grad_theta_value(const PotentialModel& m, ConstVecView x) {
    const EvalRecord r = forward(m, x);
    Vec g(m.num_params(), 0.0);
    accumulate_param_grad(m, r, 1.0, 0.0, g);
    return g;
}

inline Vec grad_theta_gradnormsq(const PotentialModel& m, ConstVecView x) {
    const EvalRecord r = forward(m, x);
    Vec g(m.num_params(), 0.0);
    accumulate_param_grad(m, r, 0.0, 1.0, g);
    return g;
}

/// He-style initialization: weights ~ N(0, 2/fan_in), zero biases, output
/// weights scaled by 0.01 so training starts near the zero potential.
inline PotentialModel init(std::vector<std::size_t> layer_sizes, Activation act, RngStream& rng) {
    if (layer_sizes.size() < 3) throw DomainError("init: at least one hidden layer is required");
    PotentialModel m(std::move(layer_sizes), act);
    auto& th = m.theta();
    const auto& layers = m.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerLayout& ly = layers[l];
        const double scale = std::sqrt(2.0 / static_cast<double>(ly.in)) * (l + 1 == layers.size() ? 0.01 : 1.0);
        for (std::size_t k = 0; k < ly.in * ly.out; ++k) th[ly.weight_offset + k] = scale * rng.normal();
    }
    return m;
}

}  // namespace vapo

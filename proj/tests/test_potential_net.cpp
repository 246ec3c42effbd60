#include <cmath>

#include <gtest/gtest.h>

#include "vapo/checkpoint.hpp"
#include "vapo/oracles.hpp"
#include "vapo/potential_net.hpp"

using namespace vapo;

namespace {

// Phi(x) = w.x + b with a single linear layer.
PotentialModel linear(const Vec& w, double b) {
    PotentialModel m({w.size(), 1}, Activation::gelu);
    std::copy(w.begin(), w.end(), m.theta().begin());
    m.theta().back() = b;
    return m;
}

PotentialModel random_net(std::vector<std::size_t> sizes, Activation act, std::uint64_t seed, double scale = 0.8) {
    PotentialModel m(std::move(sizes), act);
    RngStream rng(seed);
    for (double& v : m.theta()) v = scale * rng.normal();
    return m;
}

double gradnormsq(const PotentialModel& m, const Vec& x) {
    Vec g(m.dim());
    m.gradient(x, g);
    return detail::squared_norm(g);
}

}  // namespace

TEST(PotentialModel, LayoutAndValidation) {
    PotentialModel m({3, 5, 4, 1}, Activation::tanh);
    EXPECT_EQ(m.num_params(), 3u * 5 + 5 + 5 * 4 + 4 + 4 + 1);
    EXPECT_EQ(m.dim(), 3u);
    EXPECT_THROW(PotentialModel({3}, Activation::gelu), DomainError);
    EXPECT_THROW(PotentialModel({3, 4, 2}, Activation::gelu), DomainError);
    EXPECT_THROW(PotentialModel({3, 0, 1}, Activation::gelu), DomainError);
}

TEST(PotentialModel, ActivationNames) {
    EXPECT_EQ(activation_from_string("gelu"), Activation::gelu);
    EXPECT_EQ(activation_from_string("tanh"), Activation::tanh);
    EXPECT_THROW(activation_from_string("relu"), DomainError);
}

TEST(Forward, ZeroFinalLayerGivesConstant) {
    PotentialModel m = random_net({2, 6, 6, 1}, Activation::gelu, 1);
    const auto& last = m.layers().back();
    for (std::size_t i = 0; i < last.in; ++i) m.theta()[last.weight_offset + i] = 0.0;
    m.theta()[last.bias_offset] = 0.25;
    for (const Vec& x : {Vec{0, 0}, Vec{3, -1}, Vec{-7, 2}}) {
        const EvalRecord r = forward(m, x);
        EXPECT_EQ(r.value, 0.25);
        EXPECT_EQ(r.input_grad, (Vec{0.0, 0.0}));
    }
}

TEST(Forward, LinearModel) {
    const PotentialModel m = linear({1, 2}, 0.5);
    const EvalRecord r = forward(m, Vec{3, 4});
    EXPECT_EQ(r.value, 11.5);
    EXPECT_EQ(r.input_grad, (Vec{1, 2}));
    EXPECT_THROW(forward(m, Vec{1}), DimensionError);
}

TEST(Forward, InputGradientMatchesFiniteDifferences) {
    for (Activation act : {Activation::gelu, Activation::tanh}) {
        const PotentialModel m = random_net({3, 7, 5, 1}, act, 4);
        const Vec x{0.3, -0.7, 1.1};
        const EvalRecord r = forward(m, x);
        for (std::size_t d = 0; d < 3; ++d) {
            const double fd = oracle::central_difference(
                [&](double v) {
                    Vec y = x;
                    y[d] = v;
                    return m.value(y);
                },
                x[d], 1e-4);
            EXPECT_NEAR(r.input_grad[d], fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(GradThetaValue, Examples) {
    const PotentialModel lin = linear({1, 2}, 0.0);
    EXPECT_EQ(grad_theta_value(lin, Vec{3, 4}), (Vec{3, 4, 1}));
    const PotentialModel m = random_net({2, 4, 1}, Activation::gelu, 2);
    const Vec g = grad_theta_value(m, Vec{0.1, 0.2});
    EXPECT_EQ(g[m.layers().back().bias_offset], 1.0);
}

TEST(GradThetaValue, MatchesFiniteDifferences) {
    PotentialModel m = random_net({2, 6, 5, 1}, Activation::gelu, 5);
    const Vec x{0.4, -1.2};
    const Vec g = grad_theta_value(m, x);
    const Vec fd = oracle::numeric_gradient([&] { return m.value(x); }, m.theta(), 1e-5);
    EXPECT_LT(oracle::normwise_relative_error(g, fd), 1e-5);
}

TEST(GradThetaGradNormSq, LinearModel) {
    const PotentialModel lin = linear({1.5, -2}, 0.3);
    EXPECT_EQ(grad_theta_gradnormsq(lin, Vec{9, 9}), (Vec{3, -4, 0}));
}

TEST(GradThetaGradNormSq, ZeroFinalLayer) {
    PotentialModel m = random_net({2, 5, 5, 1}, Activation::tanh, 6);
    const auto& last = m.layers().back();
    for (std::size_t i = 0; i < last.in; ++i) m.theta()[last.weight_offset + i] = 0.0;
    const Vec g = grad_theta_gradnormsq(m, Vec{0.5, 0.5});
    for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(GradThetaGradNormSq, MatchesFiniteDifferences) {
    for (Activation act : {Activation::gelu, Activation::tanh}) {
        PotentialModel m = random_net({2, 6, 6, 1}, act, 8);
        const Vec x{-0.3, 0.9};
        const Vec g = grad_theta_gradnormsq(m, x);
        const Vec fd = oracle::numeric_gradient([&] { return gradnormsq(m, x); }, m.theta(), 1e-5);
        EXPECT_LT(oracle::normwise_relative_error(g, fd), 1e-4) << to_string(act);
    }
}

TEST(AccumulateParamGrad, IsLinearInWeights) {
    const PotentialModel m = random_net({3, 4, 4, 1}, Activation::gelu, 9);
    const Vec x{0.1, 0.2, -0.3};
    const EvalRecord r = forward(m, x);
    Vec both(m.num_params(), 0.0);
    accumulate_param_grad(m, r, 0.7, -1.3, both);
    const Vec gv = grad_theta_value(m, x), gq = grad_theta_gradnormsq(m, x);
    for (std::size_t k = 0; k < both.size(); ++k) EXPECT_NEAR(both[k], 0.7 * gv[k] - 1.3 * gq[k], 1e-12);
}

TEST(Forward, Deterministic) {
    const PotentialModel m = random_net({4, 16, 16, 1}, Activation::gelu, 10);
    const Vec x{1, 2, 3, 4};
    const EvalRecord a = forward(m, x), b = forward(m, x);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.input_grad, b.input_grad);
    EXPECT_EQ(grad_theta_gradnormsq(m, x), grad_theta_gradnormsq(m, x));
}

TEST(Init, DeterministicAndSmall) {
    RngStream r1(42), r2(42);
    EXPECT_EQ(init({2, 8, 1}, Activation::gelu, r1), init({2, 8, 1}, Activation::gelu, r2));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RngStream rng(seed);
        const std::size_t d = 1 + seed % 16, h = 1 + (seed * 37) % 256;
        const PotentialModel m = init({d, h, h, 1}, Activation::gelu, rng);
        EXPECT_LT(std::abs(m.value(Vec(d, 0.0))), 1.0);
        EXPECT_EQ(m.theta()[m.layers().back().bias_offset], 0.0);
    }
}

TEST(Init, RejectsNoHiddenLayers) {
    RngStream rng(0);
    EXPECT_THROW(init({2, 1}, Activation::gelu, rng), DomainError);
    EXPECT_THROW(init({2, 4, 3}, Activation::gelu, rng), DomainError);
}

TEST(Checkpoint, RoundTrip) {
    const PotentialModel m = random_net({3, 5, 2, 1}, Activation::tanh, 12);
    const std::string bytes = encode_checkpoint(m);
    EXPECT_EQ(bytes.substr(0, 4), "VAPO");
    EXPECT_EQ(decode_checkpoint(bytes), m);
    EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, RejectsCorruption) {
    const PotentialModel m = random_net({2, 3, 1}, Activation::gelu, 13);
    const std::string bytes = encode_checkpoint(m);
    EXPECT_THROW(decode_checkpoint("XAPO" + bytes.substr(4)), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
    std::string flipped = bytes;
    flipped[flipped.size() - 10] ^= 0x01;
    EXPECT_THROW(decode_checkpoint(flipped), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
}

#include <cmath>

#include <gtest/gtest.h>

#include "vapo/loss.hpp"
#include "vapo/oracles.hpp"

using namespace vapo;

namespace {

PotentialModel random_net(std::vector<std::size_t> sizes, Activation act, std::uint64_t seed) {
    PotentialModel m(std::move(sizes), act);
    RngStream rng(seed);
    for (double& v : m.theta()) v = 0.7 * rng.normal();
    return m;
}

PotentialModel constant_model(std::size_t dim, double c) {
    PotentialModel m({dim, 3, 1}, Activation::tanh);
    m.theta()[m.layers().back().bias_offset] = c;
    return m;
}

std::vector<Vec> random_batch(std::size_t n, std::size_t dim, RngStream& rng) {
    std::vector<Vec> b(n, Vec(dim));
    for (auto& x : b)
        for (double& v : x) v = rng.normal();
    return b;
}

}  // namespace

TEST(CovEstimator, Examples) {
    const std::vector<CovTerm> same{{3.0, 1.0, 1.0}, {-2.0, 0.5, 0.5}};
    EXPECT_EQ(cov_estimator_centered(same), 0.0);
    const std::vector<CovTerm> two{{1.0, 2.0, 1.0}, {1.0, 0.0, 1.0}};
    EXPECT_EQ(cov_estimator_centered(two), 0.0);
    EXPECT_THROW(cov_estimator_centered(std::span<const CovTerm>{}), DomainError);
}

TEST(CovEstimator, ProportionalPhiRecoversVariance) {
    // phi = gamma with a single datum: the estimator converges to Var(gamma).
    const HomotopyParams p{1.0, 0.5, 1e-4, 2};
    const Vec xb{0.5, -0.2};
    const double t = 0.6;
    const double gb = innovation_cond_mean(p, xb, t);
    RngStream rng(1);
    const std::size_t n = 1'000'000;
    std::vector<CovTerm> terms(n);
    double s = 0.0, s2 = 0.0;
    Vec noise(2);
    for (auto& term : terms) {
        for (double& e : noise) e = rng.normal();
        const double g = innovation(p, sample_cond(p, xb, t, noise), xb);
        term = {g, g, gb};
        s += g;
        s2 += g * g;
    }
    const double sample_var = s2 / n - (s / n) * (s / n);
    EXPECT_GT(sample_var, 0.0);
    EXPECT_LT(std::abs(cov_estimator_centered(terms) - sample_var) / sample_var, 0.01);
}

TEST(CovEstimator, UnbiasedForSampleCovariance) {
    // Frozen model, fixed datum and time: conditional centering and the textbook
    // covariance agree in expectation.
    const PotentialModel m = random_net({2, 5, 1}, Activation::gelu, 2);
    const HomotopyParams p{1.0, 0.8, 1e-4, 2};
    const Vec xb{1.0, 0.3};
    const double t = 0.7;
    const double gb = innovation_cond_mean(p, xb, t);
    RngStream rng(3);
    const std::size_t n = 200'000;
    std::vector<double> phi(n), gam(n), prod(n);
    Vec noise(2);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& e : noise) e = rng.normal();
        const Vec x = sample_cond(p, xb, t, noise);
        phi[i] = m.value(x);
        gam[i] = innovation(p, x, xb);
        prod[i] = phi[i] * (gam[i] - gb);
    }
    double mp = 0, mg = 0, mc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += phi[i];
        mg += gam[i];
        mc += prod[i];
    }
    mp /= n;
    mg /= n;
    mc /= n;
    double textbook = 0, var_c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        textbook += (phi[i] - mp) * (gam[i] - mg);
        var_c += (prod[i] - mc) * (prod[i] - mc);
    }
    textbook /= (n - 1);
    const double se = std::sqrt(var_c / n);
    EXPECT_NEAR(mc, textbook, 3.0 * se);
}

TEST(BatchLoss, ZeroModelGivesZero) {
    const PotentialModel m({2, 4, 4, 1}, Activation::gelu);
    const HomotopyParams p{1.0, 0.01, 1e-4, 2};
    RngStream rng(4);
    auto [lb, grad] = batch_loss(m, p, 1e-3, random_batch(16, 2, rng), rng);
    EXPECT_EQ(lb.cov_term, 0.0);
    EXPECT_EQ(lb.gradsq_term, 0.0);
    EXPECT_EQ(lb.l2_term, 0.0);
    EXPECT_EQ(lb.total, 0.0);
    EXPECT_EQ(lb.batch_size, 16u);
}

TEST(BatchLoss, ConstantModel) {
    const double c = 0.7, lambda = 1e-3;
    const PotentialModel m = constant_model(2, c);
    const HomotopyParams p{1.0, 0.5, 1e-4, 2};
    RngStream rng(5);
    const std::size_t n = 100'000;
    const auto samples = draw_loss_samples(p, random_batch(n, 2, rng), rng);
    const LossBreakdown lb = evaluate_loss(m, p, lambda, samples);
    EXPECT_EQ(lb.gradsq_term, 0.0);
    EXPECT_NEAR(lb.l2_term, c * c, 1e-12);
    double s2 = 0.0;
    for (const auto& s : samples) {
        const double v = c * (innovation(p, s.x, s.xbar) - innovation_cond_mean(p, s.xbar, s.t));
        s2 += v * v;
    }
    const double se = std::sqrt(s2 / n / n);
    EXPECT_LT(std::abs(lb.cov_term), 3.0 * se);
    EXPECT_NEAR(lb.total, 0.5 * lambda * c * c, 0.5 * 3.0 * se);
}

TEST(BatchLoss, TotalIsHalfBracket) {
    const PotentialModel m = random_net({2, 5, 5, 1}, Activation::gelu, 6);
    const HomotopyParams p{1.0, 0.3, 1e-2, 2};
    RngStream rng(6);
    auto [lb, grad] = batch_loss(m, p, 0.05, random_batch(32, 2, rng), rng);
    EXPECT_DOUBLE_EQ(lb.total, 0.5 * (lb.cov_term + lb.gradsq_term + 0.05 * lb.l2_term));
    EXPECT_GE(lb.gradsq_term, 0.0);
    EXPECT_GE(lb.l2_term, 0.0);
}

TEST(BatchLoss, GradientMatchesFiniteDifferences) {
    RngStream rng(7);
    for (int c = 0; c < 20; ++c) {
        PotentialModel m = random_net({2, 4, 4, 1}, c % 2 ? Activation::tanh : Activation::gelu, 100 + c);
        const HomotopyParams p{1.0, 0.4, 0.05, 2};
        const auto samples = draw_loss_samples(p, random_batch(8, 2, rng), rng);
        Vec g(m.num_params());
        evaluate_loss(m, p, 1e-2, samples, g);
        const Vec fd =
            oracle::numeric_gradient([&] { return evaluate_loss(m, p, 1e-2, samples).total; }, m.theta(), 1e-5);
        EXPECT_LT(oracle::normwise_relative_error(g, fd), 1e-4) << c;
    }
}

TEST(BatchLoss, SmallStepDescends) {
    PotentialModel m = random_net({2, 6, 6, 1}, Activation::gelu, 8);
    const HomotopyParams p{1.0, 0.2, 1e-2, 2};
    RngStream rng(8);
    const auto samples = draw_loss_samples(p, random_batch(64, 2, rng), rng);
    Vec g(m.num_params());
    const double before = evaluate_loss(m, p, 1e-3, samples, g).total;
    for (std::size_t k = 0; k < g.size(); ++k) m.theta()[k] -= 1e-6 * g[k];
    EXPECT_LT(evaluate_loss(m, p, 1e-3, samples).total, before);
}

TEST(BatchLoss, Errors) {
    const PotentialModel m({2, 3, 1}, Activation::gelu);
    RngStream rng(9);
    EXPECT_THROW(batch_loss(m, HomotopyParams{1, 1, 1e-4, 2}, 1e-3, {}, rng), DomainError);
    EXPECT_THROW(batch_loss(m, HomotopyParams{1, 1, 1e-4, 3}, 1e-3, random_batch(2, 3, rng), rng), DimensionError);
    EXPECT_THROW(batch_loss(m, HomotopyParams{1, 1, 1e-4, 2}, 1e-3, random_batch(2, 3, rng), rng), DimensionError);
}

TEST(BatchLoss, DeterministicUnderThreadCount) {
    const PotentialModel m = random_net({2, 8, 8, 1}, Activation::gelu, 10);
    const HomotopyParams p{1.0, 0.1, 0.5, 2};
    RngStream r0(11);
    const auto batch = random_batch(100, 2, r0);
    RngStream a(12), b(12);
    setenv("VAPO_THREADS", "1", 1);
    auto [la, ga] = batch_loss(m, p, 1e-3, batch, a);
    setenv("VAPO_THREADS", "4", 1);
    auto [lb, gb] = batch_loss(m, p, 1e-3, batch, b);
    unsetenv("VAPO_THREADS");
    EXPECT_EQ(la.total, lb.total);
    EXPECT_EQ(ga, gb);
}

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "adabayes/step_rules.hpp"
#include "oracles.hpp"

using namespace adabayes;

namespace {

HyperParams base_hp() {
    HyperParams hp;
    hp.eta = 1e-3;
    hp.eta_sgd = 0.1;
    hp.minibatch_size = 1;
    hp.sigma2 = 1e-3;
    hp.lambda = 0.0;
    hp.beta1 = 0.9;
    hp.beta2 = 0.999;
    hp.eps = 1e-8;
    return hp;
}

}  // namespace

// ---- update_moments ---------------------------------------------------------

TEST(UpdateMoments, FirstStepRecoversGradientExactly) {
    auto hp = base_hp();
    MomentState s(1);
    s.t = 1;
    const std::vector<double> g{1.0};
    const auto out = update_moments(s, g, hp);
    EXPECT_EQ(out.gbar[0], 1.0);
}

TEST(UpdateMoments, ZeroBetasAreIdentity) {
    auto hp = base_hp();
    hp.beta1 = 0.0;
    hp.beta2 = 0.0;
    MomentState s(1);
    const std::vector<double> g{3.0};
    for (int t = 1; t <= 4; ++t) {
        s.t = t;
        const auto out = update_moments(s, g, hp);
        EXPECT_EQ(out.gbar[0], 3.0);
        EXPECT_EQ(out.g2bar[0], 9.0);
    }
}

TEST(UpdateMoments, ConstantStreamDebiasedAtEveryStep) {
    auto hp = base_hp();
    MomentState s(1);
    const std::vector<double> g{2.0};
    for (int t = 1; t <= 5; ++t) {
        s.t = t;
        const auto out = update_moments(s, g, hp);
        EXPECT_DOUBLE_EQ(out.gbar[0], 2.0) << "t=" << t;
        EXPECT_NEAR(out.g2bar[0], 4.0, 4.0 * 1e-12) << "t=" << t;
    }
}

TEST(UpdateMoments, RejectsNonFiniteGradientNamingIndex) {
    auto hp = base_hp();
    MomentState s(3);
    s.t = 1;
    const std::vector<double> g{0.0, 1.0, std::numeric_limits<double>::quiet_NaN()};
    try {
        update_moments(s, g, hp);
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
    }
}

TEST(UpdateMoments, RequiresIncrementedCounter) {
    auto hp = base_hp();
    MomentState s(1);
    const std::vector<double> g{1.0};
    EXPECT_THROW(update_moments(s, g, hp), std::logic_error);
}

TEST(UpdateMoments, SecondMomentStaysNonNegative) {
    auto hp = base_hp();
    MomentState s(16);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 10.0);
    std::vector<double> g(16);
    for (int t = 1; t <= 200; ++t) {
        for (auto& x : g) x = normal(rng);
        s.t = t;
        update_moments(s, g, hp);
        for (double v : s.v) ASSERT_GE(v, 0.0);
    }
}

// ---- SGD --------------------------------------------------------------------

TEST(SgdStep, SubstitutesIntoUpdate) {
    auto hp = base_hp();
    hp.eta_sgd = 0.1;
    hp.minibatch_size = 100;
    std::vector<double> w{0.0, 0.0};
    MomentState s(2);
    const std::vector<double> g{2.0, 2.0};
    const auto report = sgd_step(w, s, g, hp);
    EXPECT_NEAR(w[0], 2e-3, 1e-18);
    EXPECT_NEAR(w[1], 2e-3, 1e-18);
    EXPECT_EQ(s.t, 1u);
    EXPECT_DOUBLE_EQ(report.s_post_mean, 1e-3);
}

TEST(SgdStep, ZeroGradientLeavesParams) {
    auto hp = base_hp();
    std::vector<double> w{0.5};
    MomentState s(1);
    const std::vector<double> g{0.0};
    const auto report = sgd_step(w, s, g, hp);
    EXPECT_EQ(w[0], 0.5);
    EXPECT_EQ(report.delta_norm, 0.0);
}

TEST(SgdStep, NegativeGradientUnitBatch) {
    auto hp = base_hp();
    hp.minibatch_size = 1;
    std::vector<double> w{0.0};
    MomentState s(1);
    const std::vector<double> g{-1.0};
    sgd_step(w, s, g, hp);
    EXPECT_DOUBLE_EQ(w[0], -0.1);
}

TEST(SgdStep, CoupledL2ShrinksByEtaSgdTimesL2) {
    auto hp = base_hp();
    hp.beta1 = 0.0;
    hp.minibatch_size = 128;
    hp.l2 = 5e-4;
    std::vector<double> w{1.0};
    MomentState s(1);
    const std::vector<double> g{0.0};
    sgd_step(w, s, g, hp);
    EXPECT_NEAR(w[0], 1.0 - hp.eta_sgd * hp.l2, 1e-15);
}

// ---- Adam / AdamW -----------------------------------------------------------

TEST(AdamStep, ConstantGradientMovesByEta) {
    auto hp = base_hp();
    hp.eps = 0.0;
    std::vector<double> w{0.0};
    MomentState s(1);
    const std::vector<double> g{3.0};
    for (int t = 0; t < 10; ++t) {
        const double before = w[0];
        adam_step(w, s, g, hp);
        EXPECT_NEAR(w[0] - before, 1e-3, 1e-15);
    }
}

TEST(AdamStep, ZeroGradientNoMotion) {
    auto hp = base_hp();
    std::vector<double> w{0.25};
    MomentState s(1);
    const std::vector<double> g{0.0};
    for (int t = 0; t < 5; ++t) adam_step(w, s, g, hp);
    EXPECT_EQ(w[0], 0.25);
}

TEST(AdamStep, AlternatingSignsWithoutMomentumMoveByEta) {
    auto hp = base_hp();
    hp.beta1 = 0.0;
    hp.eps = 0.0;
    std::vector<double> w{0.0};
    MomentState s(1);
    const double c = 7.5;
    for (int t = 0; t < 20; ++t) {
        const std::vector<double> g{t % 2 == 0 ? c : -c};
        const double before = w[0];
        adam_step(w, s, g, hp);
        EXPECT_NEAR(std::abs(w[0] - before), 1e-3, 1e-15);
    }
}

TEST(AdamWStep, NoDecayMatchesAdam) {
    auto hp = base_hp();
    std::vector<double> a{0.3, -0.2};
    std::vector<double> b = a;
    MomentState sa(2), sb(2);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 50; ++t) {
        const std::vector<double> g{normal(rng), normal(rng)};
        adam_step(a, sa, g, hp);
        adamw_step(b, sb, g, hp);
    }
    EXPECT_EQ(a, b);
}

TEST(AdamWStep, PureDecayRecursion) {
    auto hp = base_hp();
    hp.lambda = 5e-5;
    std::vector<double> w{1.0};
    MomentState s(1);
    const std::vector<double> g{0.0};
    const int steps = 1000;
    for (int t = 0; t < steps; ++t) adamw_step(w, s, g, hp);
    EXPECT_NEAR(w[0], std::pow(1.0 - 5e-5, steps), 1e-13);
}

TEST(AdamWStep, ConstantGradientUpdateIndependentOfMagnitude) {
    auto hp = base_hp();
    hp.lambda = 5e-5;
    hp.eps = 0.0;
    for (double mag : {1e-3, 1.0, 1e4}) {
        std::vector<double> w{0.5};
        MomentState s(1);
        const std::vector<double> g{-mag};
        adamw_step(w, s, g, hp);
        EXPECT_NEAR(w[0], (1.0 - 5e-5) * 0.5 - 1e-3, 1e-15) << "|g|=" << mag;
    }
}

// Multiplying every gradient by c leaves the Adam/AdamW trajectory unchanged.
// Powers of two scale m, v and sqrt(v) exactly, so the match is bitwise.
TEST(ScaleCovariance, AdamFamilyAndSigmaInfinityFilter) {
    auto hp = base_hp();
    hp.eps = 0.0;
    hp.lambda = 5e-5;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> stream(300, std::vector<double>(4));
    for (auto& g : stream)
        for (auto& x : g) x = normal(rng);

    auto run = [&](auto rule, double c, HyperParams h) {
        std::vector<double> w{0.1, -0.1, 0.2, 0.0};
        MomentState s(4);
        std::vector<double> scaled(4);
        for (const auto& g : stream) {
            for (std::size_t i = 0; i < 4; ++i) scaled[i] = c * g[i];
            rule(std::span<double>(w), s, std::span<const double>(scaled), h);
        }
        return w;
    };
    auto adam = [](std::span<double> w, MomentState& s, std::span<const double> g, const HyperParams& h) {
        adam_step(w, s, g, h);
    };
    auto adamw = [](std::span<double> w, MomentState& s, std::span<const double> g, const HyperParams& h) {
        adamw_step(w, s, g, h);
    };
    auto ss = [](std::span<double> w, MomentState& s, std::span<const double> g, const HyperParams& h) {
        adabayes_ss_step(w, s, g, h);
    };
    auto adam_hp = hp;
    adam_hp.lambda = 0.0;
    auto ss_hp = hp;
    ss_hp.sigma2 = 1e300;

    for (double c : {0.25, 8.0, 1024.0}) {
        EXPECT_EQ(run(adam, 1.0, adam_hp), run(adam, c, adam_hp)) << "c=" << c;
        EXPECT_EQ(run(adamw, 1.0, hp), run(adamw, c, hp)) << "c=" << c;
    }
    for (double c : {0.37, 3.1, 1e3}) {
        const auto base = run(ss, 1.0, ss_hp);
        const auto scaled = run(ss, c, ss_hp);
        for (std::size_t i = 0; i < base.size(); ++i) {
            EXPECT_NEAR(base[i], scaled[i], 1e-12 * std::max(1.0, std::abs(base[i]))) << "c=" << c;
        }
        const auto a = run(adamw, 1.0, hp);
        const auto b = run(adamw, c, hp);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(a[i], b[i], 1e-12 * std::max(1.0, std::abs(a[i]))) << "c=" << c;
        }
    }
}

// ---- AdaBayes ---------------------------------------------------------------

TEST(AdaBayesStep, FirstStepMatchesScalarReference) {
    auto hp = base_hp();
    hp.sigma2 = 0.01;
    hp.eta = 0.001;
    hp.lambda = 0.0;
    std::vector<double> w{0.0};
    auto f = init_filter_state(w, hp);
    MomentState m(1);
    const std::vector<double> g{2.0};
    adabayes_step(w, f, m, g, hp);

    oracle::ScalarFilter ref{0.0, 0.01, 0.0, 0};
    oracle::adabayes_scalar(ref, 2.0, 0.001, 0.01, 0.0, 0.9);
    EXPECT_EQ(f.s_post[0], ref.s_post);
    EXPECT_EQ(w[0], ref.mu);

    // frozen from a 40-digit evaluation of the same recursion
    EXPECT_NEAR(f.s_post[0], 9.61538463849852e-3, 1e-16);
    EXPECT_NEAR(w[0], 1.923076927699704e-2, 1e-16);
    EXPECT_EQ(f.mu[0], w[0]);
}

TEST(AdaBayesStep, ZeroGradientGrowsTowardDiffusionFixedPoint) {
    auto hp = base_hp();
    hp.sigma2 = 1e-3;
    hp.eta = 1e-3;
    std::vector<double> w{0.7};
    auto f = init_filter_state(w, hp);
    f.s_post[0] = 1e-6;  // start far below so growth is visible
    MomentState m(1);
    const std::vector<double> g{0.0};
    double previous = f.s_post[0];
    for (int t = 0; t < 200000; ++t) {
        adabayes_step(w, f, m, g, hp);
        ASSERT_GE(f.s_post[0], previous * (1.0 - 1e-15));
        previous = f.s_post[0];
    }
    const double d = hp.drift();
    const double fixed = hp.eta * hp.eta / (1.0 - d * d);
    EXPECT_NEAR(f.s_post[0], fixed, 1e-6 * fixed);
    EXPECT_NEAR(fixed, oracle::recursion_fixed_point(hp.sigma2, hp.eta, 0.0), 1e-12 * fixed);
    EXPECT_EQ(w[0], 0.7);
}

TEST(AdaBayesStep, NoDynamicsMatchesRunningPrecision) {
    auto hp = base_hp();
    hp.eta = 0.0;
    hp.sigma2 = 0.5;
    std::vector<double> w{0.0};
    auto f = init_filter_state(w, hp);
    MomentState m(1);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    double precision = 1.0 / hp.sigma2;
    for (int t = 0; t < 1000; ++t) {
        const std::vector<double> g{normal(rng)};
        adabayes_step(w, f, m, g, hp);
        precision += g[0] * g[0];
        EXPECT_NEAR(f.s_post[0], 1.0 / precision, 1e-12 / precision);
    }
}

TEST(AdaBayesStep, PosteriorVarianceStaysBounded) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto hp = base_hp();
        hp.sigma2 = std::pow(10.0, -6.0 + 5.0 * unit(rng));
        hp.eta = std::sqrt(hp.sigma2) * std::pow(10.0, -3.0 + 2.5 * unit(rng));
        hp.lambda = 5e-5;
        std::vector<double> w(8, 0.0);
        auto f = init_filter_state(w, hp);
        MomentState m(8);
        std::normal_distribution<double> normal(0.0, std::pow(10.0, -4.0 + 8.0 * unit(rng)));
        std::vector<double> g(8);
        const double bound = hp.sigma2 * (1.0 + hp.eta * hp.eta / hp.sigma2);
        for (int t = 0; t < 300; ++t) {
            for (auto& x : g) x = (t % 50 < 10) ? 0.0 : normal(rng);
            const auto r = adabayes_step(w, f, m, g, hp);
            ASSERT_LE(r.s_post_min, r.s_post_mean);
            ASSERT_LE(r.s_post_mean, r.s_post_max);
            for (double s : f.s_post) {
                ASSERT_GT(s, 0.0);
                ASSERT_LT(s, bound) << "sigma2=" << hp.sigma2 << " eta=" << hp.eta;
            }
        }
    }
}

TEST(AdaBayesStep, NeverReadsEps) {
    auto hp = base_hp();
    std::vector<double> a{0.0}, b{0.0};
    auto fa = init_filter_state(a, hp);
    auto fb = init_filter_state(b, hp);
    MomentState ma(1), mb(1);
    auto hp_b = hp;
    hp_b.eps = 123.0;
    const std::vector<double> g{0.4};
    adabayes_step(a, fa, ma, g, hp);
    adabayes_step(b, fb, mb, g, hp_b);
    EXPECT_EQ(a, b);
    MomentState sa(1), sb(1);
    adabayes_ss_step(a, sa, g, hp);
    adabayes_ss_step(b, sb, g, hp_b);
    EXPECT_EQ(a, b);
}

TEST(AdaBayesStep, RejectsMismatchedState) {
    auto hp = base_hp();
    std::vector<double> w{0.0, 0.0};
    auto f = init_filter_state(std::vector<double>{0.0}, hp);
    MomentState m(2);
    const std::vector<double> g{1.0, 1.0};
    EXPECT_THROW(adabayes_step(w, f, m, g, hp), std::invalid_argument);
}

// ---- AdaBayes-SS ------------------------------------------------------------

TEST(AdaBayesSsStep, ZeroSecondMomentGivesPriorVariance) {
    auto hp = base_hp();
    hp.sigma2 = 2e-3;
    std::vector<double> w{1.0};
    MomentState m(1);
    const std::vector<double> g{0.0};
    const auto r = adabayes_ss_step(w, m, g, hp);
    EXPECT_DOUBLE_EQ(r.s_post_mean, 2e-3);
}

TEST(AdaBayesSsStep, MatchesQuadraticFormulaRoot) {
    auto hp = base_hp();
    hp.sigma2 = 1e-3;
    hp.eta = 1e-3;
    hp.beta1 = 0.0;
    hp.beta2 = 0.0;  // g2bar = g^2 = 1 on the first step
    std::vector<double> w{0.0};
    MomentState m(1);
    const std::vector<double> g{1.0};
    const auto r = adabayes_ss_step(w, m, g, hp);
    const double expected = oracle::quadratic_formula_s_post(1e-3, 1e-3, 1.0);
    EXPECT_NEAR(r.s_post_mean, expected, 1e-15);
    EXPECT_NEAR(r.s_post_mean, 6.180339887498948e-4, 1e-16);
    EXPECT_NEAR(1.0 / r.s_post_mean, 1618.0339887498948, 1e-9);
    EXPECT_DOUBLE_EQ(w[0], r.s_post_mean);
}

TEST(AdaBayesSsStep, HugePriorGivesAdamRate) {
    auto hp = base_hp();
    hp.sigma2 = 1e12;
    for (double g2 : {1e-4, 1.0, 4.0, 1e6}) {
        hp.beta1 = 0.0;
        hp.beta2 = 0.0;
        std::vector<double> w{0.0};
        MomentState m(1);
        const std::vector<double> g{std::sqrt(g2)};
        const auto r = adabayes_ss_step(w, m, g, hp);
        const double expected = hp.eta / std::sqrt(g2);
        EXPECT_NEAR(r.s_post_mean, expected, 5e-7 * expected) << "g2=" << g2;
    }
}

TEST(AdaBayesSsStep, RequiresPositiveEta) {
    auto hp = base_hp();
    hp.eta = 0.0;
    std::vector<double> w{0.0};
    MomentState m(1);
    const std::vector<double> g{1.0};
    EXPECT_THROW(adabayes_ss_step(w, m, g, hp), std::invalid_argument);
}

// ---- init_filter_state ------------------------------------------------------

TEST(InitFilterState, FillsPriorVariance) {
    auto hp = base_hp();
    hp.sigma2 = 1e-3;
    const std::vector<double> init{0.5, -1.0, 2.0};
    const auto f = init_filter_state(init, hp);
    EXPECT_EQ(f.mu, init);
    for (double s : f.s_post) EXPECT_EQ(s, 1e-3);
}

TEST(InitFilterState, EmptyShapeIsNoOp) {
    auto hp = base_hp();
    std::vector<double> w;
    auto f = init_filter_state(w, hp);
    EXPECT_EQ(f.size(), 0u);
    MomentState m(0);
    const std::vector<double> g;
    const auto r = adabayes_step(w, f, m, g, hp);
    EXPECT_EQ(r.delta_norm, 0.0);
    EXPECT_EQ(r.s_post_mean, 0.0);
}

TEST(InitFilterState, CalibratedFromSgd) {
    auto hp = HyperParams::defaults(100);
    EXPECT_DOUBLE_EQ(hp.sigma2, 1e-3);
    const auto f = init_filter_state(std::vector<double>(4, 0.0), hp);
    for (double s : f.s_post) EXPECT_DOUBLE_EQ(s, 1e-3);
}

// ---- HyperParams ------------------------------------------------------------

TEST(HyperParamsValidate, RejectsNonContractiveDrift) {
    auto hp = base_hp();
    hp.sigma2 = 1e-6;
    hp.eta = 2e-3;  // eta^2 / (2 sigma2) = 2
    EXPECT_THROW(hp.validate(), std::invalid_argument);
    hp.eta = 1e-3;  // ratio 0.5
    EXPECT_NO_THROW(hp.validate());
}

TEST(HyperParamsValidate, RejectsBadFields) {
    auto bad = [](auto mutate) {
        auto hp = base_hp();
        mutate(hp);
        return hp;
    };
    EXPECT_THROW(bad([](HyperParams& h) { h.sigma2 = 0.0; }).validate(), std::invalid_argument);
    EXPECT_THROW(bad([](HyperParams& h) { h.eta = -1.0; }).validate(), std::invalid_argument);
    EXPECT_THROW(bad([](HyperParams& h) { h.minibatch_size = 0; }).validate(), std::invalid_argument);
    EXPECT_THROW(bad([](HyperParams& h) { h.beta1 = 1.0; }).validate(), std::invalid_argument);
    EXPECT_THROW(bad([](HyperParams& h) { h.beta2 = -0.1; }).validate(), std::invalid_argument);
    EXPECT_THROW(bad([](HyperParams& h) { h.lambda = -1e-5; }).validate(), std::invalid_argument);
    EXPECT_NO_THROW(bad([](HyperParams& h) { h.eps = 0.0; }).validate());
}

#include <gtest/gtest.h>

#include <vector>

#include "adabayes/optimizer.hpp"

using namespace adabayes;

TEST(OptimizerKindNames, RoundTrip) {
    for (auto k : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::adamw, OptimizerKind::adabayes,
                   OptimizerKind::adabayes_ss}) {
        EXPECT_EQ(parse_optimizer_kind(to_string(k)), k);
    }
    EXPECT_FALSE(parse_optimizer_kind("adagrad").has_value());
}

TEST(Optimizer, ValidatesHyperParamsOnConstruction) {
    HyperParams hp;
    hp.sigma2 = -1.0;
    EXPECT_THROW(Optimizer(OptimizerKind::adam, hp), std::invalid_argument);
    HyperParams zero_eta;
    zero_eta.eta = 0.0;
    EXPECT_NO_THROW(Optimizer(OptimizerKind::adabayes, zero_eta));
    EXPECT_THROW(Optimizer(OptimizerKind::adabayes_ss, zero_eta), std::invalid_argument);
}

// Stepping two tensors through one optimizer equals stepping each alone.
TEST(Optimizer, MultiSlotMatchesPerTensorRules) {
    HyperParams hp = HyperParams::defaults(4);
    std::vector<double> a{0.1, 0.2, 0.3};
    std::vector<double> b{-1.0};
    Optimizer opt(OptimizerKind::adabayes, hp);
    opt.add_slot(a);
    opt.add_slot(b);

    std::vector<double> ra = a, rb = b;
    auto fa = init_filter_state(ra, hp);
    auto fb = init_filter_state(rb, hp);
    MomentState ma(3), mb(1);

    for (int t = 0; t < 20; ++t) {
        const std::vector<double> ga{0.5 * t, -1.0, 0.25};
        const std::vector<double> gb{0.1 * t};
        std::vector<std::span<double>> params{a, b};
        std::vector<std::span<const double>> grads{ga, gb};
        const auto report = opt.step(params, grads);
        adabayes_step(ra, fa, ma, ga, hp);
        adabayes_step(rb, fb, mb, gb, hp);
        EXPECT_LE(report.s_post_min, report.s_post_mean);
        EXPECT_LE(report.s_post_mean, report.s_post_max);
    }
    EXPECT_EQ(a, ra);
    EXPECT_EQ(b, rb);
    EXPECT_EQ(opt.step_count(), 20u);
    EXPECT_EQ(opt.slots()[0].filter->s_post, fa.s_post);
}

TEST(Optimizer, RejectsBadGradientWithoutPartialUpdate) {
    Optimizer opt(OptimizerKind::adam, HyperParams{});
    std::vector<double> a{1.0}, b{2.0};
    opt.add_slot(a);
    opt.add_slot(b);
    const std::vector<double> ga{1.0}, gb{std::numeric_limits<double>::infinity()};
    std::vector<std::span<double>> params{a, b};
    std::vector<std::span<const double>> grads{ga, gb};
    EXPECT_THROW(opt.step(params, grads), std::invalid_argument);
    EXPECT_EQ(a[0], 1.0);
    EXPECT_EQ(opt.step_count(), 0u);
}

TEST(Optimizer, RestoreChecksShapes) {
    Optimizer opt(OptimizerKind::adabayes, HyperParams{});
    std::vector<double> a{1.0, 2.0};
    opt.add_slot(a);
    auto slots = opt.slots();
    slots[0].moments.m.push_back(0.0);
    EXPECT_THROW(opt.restore(slots), std::invalid_argument);
    slots = opt.slots();
    slots[0].filter.reset();
    EXPECT_THROW(opt.restore(slots), std::invalid_argument);
    EXPECT_NO_THROW(opt.restore(opt.slots()));
}

TEST(MergeReports, WeightsMeanBySize) {
    const std::vector<StepReport> reports{{3.0, 1.0, 1.0, 1.0}, {4.0, 4.0, 2.0, 6.0}};
    const std::vector<std::size_t> sizes{3, 1};
    const auto r = merge_reports(reports, sizes);
    EXPECT_DOUBLE_EQ(r.delta_norm, 5.0);
    EXPECT_DOUBLE_EQ(r.s_post_mean, 7.0 / 4.0);
    EXPECT_DOUBLE_EQ(r.s_post_min, 1.0);
    EXPECT_DOUBLE_EQ(r.s_post_max, 6.0);
}

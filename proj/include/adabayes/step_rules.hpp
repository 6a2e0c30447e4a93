#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adabayes/hyper_params.hpp"

namespace adabayes {

/// Raw exponential moving averages of the gradient and squared gradient.
/// `t` counts completed optimizer steps; every step rule increments it before
/// debiasing, so debiased moments are always formed with t >= 1.
struct MomentState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    MomentState() = default;
    explicit MomentState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}

    std::size_t size() const noexcept { return m.size(); }
};

/// Posterior mean and variance per parameter (AdaBayes only).
struct FilterState {
    std::vector<double> mu;
    std::vector<double> s_post;

    std::size_t size() const noexcept { return mu.size(); }
};

/// Summary of one step. The s_post fields hold the per-element effective
/// learning rate of whichever rule ran (s_post for the filters, eta_sgd / B
/// for SGD, eta / (sqrt(g2bar) + eps) for Adam/AdamW).
struct StepReport {
    double delta_norm = 0.0;
    double s_post_mean = 0.0;
    double s_post_min = 0.0;
    double s_post_max = 0.0;
};

struct DebiasedMoments {
    std::vector<double> gbar;
    std::vector<double> g2bar;
};

/// Throws std::invalid_argument naming the first non-finite index.
void require_finite(std::span<const double> g, const char* what = "gradient");

/// Folds g into the EMAs and returns the debiased estimates. Requires t >= 1.
DebiasedMoments update_moments(MomentState& state, std::span<const double> g, const HyperParams& hp);

// Step rules. `g` follows the ascent convention (the negated loss gradient of
// the summed minibatch loss): each rule adds rate * gbar to the parameters.

StepReport sgd_step(std::span<double> params, MomentState& state, std::span<const double> g,
                    const HyperParams& hp);

StepReport adam_step(std::span<double> params, MomentState& state, std::span<const double> g,
                     const HyperParams& hp);

StepReport adamw_step(std::span<double> params, MomentState& state, std::span<const double> g,
                      const HyperParams& hp);

/// One AdaBayes step. `params` is the posterior mean and is kept in sync with
/// fstate.mu. The precision update uses the raw squared gradient.
StepReport adabayes_step(std::span<double> params, FilterState& fstate, MomentState& mstate,
                         std::span<const double> g, const HyperParams& hp);

/// One AdaBayes-SS step: s_post is recomputed from the debiased second moment
/// every step, so no filter state is carried.
StepReport adabayes_ss_step(std::span<double> params, MomentState& mstate, std::span<const double> g,
                            const HyperParams& hp);

/// s_post = sigma2 everywhere; mu adopts the caller's initial parameters.
FilterState init_filter_state(std::span<const double> initial_params, const HyperParams& hp);

}  // namespace adabayes

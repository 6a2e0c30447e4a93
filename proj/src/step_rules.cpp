#include "adabayes/step_rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace adabayes {

namespace {

void require_same_size(std::size_t expected, std::size_t actual, const char* what) {
    if (expected != actual) {
        throw std::invalid_argument(std::string(what) + " has " + std::to_string(actual) +
                                    " elements, expected " + std::to_string(expected));
    }
}

// Running min / mean / max of per-element rates plus the squared update norm.
class ReportBuilder {
public:
    void add(double rate, double delta) {
        min_ = std::min(min_, rate);
        max_ = std::max(max_, rate);
        sum_ += rate;
        delta_sq_ += delta * delta;
        ++count_;
    }

    StepReport finish() const {
        StepReport r;
        r.delta_norm = std::sqrt(delta_sq_);
        if (count_ > 0) {
            r.s_post_min = min_;
            r.s_post_max = max_;
            // clamp: the mean of rounded values can drift outside [min, max]
            r.s_post_mean = std::clamp(sum_ / static_cast<double>(count_), min_, max_);
        }
        return r;
    }

private:
    double min_ = std::numeric_limits<double>::infinity();
    double max_ = -std::numeric_limits<double>::infinity();
    double sum_ = 0.0;
    double delta_sq_ = 0.0;
    std::size_t count_ = 0;
};

// g - B * l2 * w: coupled L2 on the mean loss, expressed for a summed-loss
// ascent-direction gradient.
std::vector<double> fold_l2(std::span<const double> params, std::span<const double> g, const HyperParams& hp) {
    std::vector<double> out(g.begin(), g.end());
    if (hp.l2 == 0.0) {
        return out;
    }
    const double coupling = static_cast<double>(hp.minibatch_size) * hp.l2;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= coupling * params[i];
    }
    return out;
}

StepReport normalized_step(std::span<double> params, MomentState& state, std::span<const double> g,
                           const HyperParams& hp, double keep) {
    ++state.t;
    const auto [gbar, g2bar] = update_moments(state, g, hp);
    ReportBuilder report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double denom = std::sqrt(g2bar[i]) + hp.eps;
        // denom == 0 only when eps == 0 and every gradient so far was zero,
        // in which case gbar is zero as well.
        const double rate = denom > 0.0 ? hp.eta / denom : 0.0;
        const double before = params[i];
        params[i] = keep * before + rate * gbar[i];
        report.add(rate, params[i] - before);
    }
    return report.finish();
}

}  // namespace

void require_finite(std::span<const double> g, const char* what) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            throw std::invalid_argument(std::string("non-finite ") + what + " at index " + std::to_string(i) +
                                        " (value " + std::to_string(g[i]) + ")");
        }
    }
}

DebiasedMoments update_moments(MomentState& state, std::span<const double> g, const HyperParams& hp) {
    require_same_size(state.m.size(), g.size(), "gradient");
    require_same_size(state.m.size(), state.v.size(), "second-moment buffer");
    if (state.t < 1) {
        throw std::logic_error("update_moments called with step counter t = 0");
    }
    require_finite(g);

    const double t = static_cast<double>(state.t);
    const double debias1 = 1.0 - std::pow(hp.beta1, t);
    const double debias2 = 1.0 - std::pow(hp.beta2, t);

    DebiasedMoments out{std::vector<double>(g.size()), std::vector<double>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) {
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g[i];
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * (g[i] * g[i]);
        out.gbar[i] = state.m[i] / debias1;
        out.g2bar[i] = state.v[i] / debias2;
    }
    return out;
}

StepReport sgd_step(std::span<double> params, MomentState& state, std::span<const double> g,
                    const HyperParams& hp) {
    require_same_size(state.size(), params.size(), "parameter buffer");
    require_finite(g);
    const auto folded = fold_l2(params, g, hp);

    ++state.t;
    const auto moments = update_moments(state, folded, hp);
    const double rate = hp.eta_sgd / static_cast<double>(hp.minibatch_size);
    ReportBuilder report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double delta = rate * moments.gbar[i];
        params[i] += delta;
        report.add(rate, delta);
    }
    return report.finish();
}

StepReport adam_step(std::span<double> params, MomentState& state, std::span<const double> g,
                     const HyperParams& hp) {
    require_same_size(state.size(), params.size(), "parameter buffer");
    require_finite(g);
    const auto folded = fold_l2(params, g, hp);
    return normalized_step(params, state, folded, hp, 1.0);
}

StepReport adamw_step(std::span<double> params, MomentState& state, std::span<const double> g,
                      const HyperParams& hp) {
    require_same_size(state.size(), params.size(), "parameter buffer");
    return normalized_step(params, state, g, hp, 1.0 - hp.lambda);
}

StepReport adabayes_step(std::span<double> params, FilterState& fstate, MomentState& mstate,
                         std::span<const double> g, const HyperParams& hp) {
    require_same_size(mstate.size(), params.size(), "parameter buffer");
    require_same_size(fstate.size(), params.size(), "filter state");
    require_same_size(fstate.s_post.size(), params.size(), "posterior variance buffer");

    ++mstate.t;
    const auto moments = update_moments(mstate, g, hp);
    const double drift = hp.drift();
    const double drift_sq = drift * drift;
    const double diffusion = hp.eta * hp.eta;
    const double keep = 1.0 - hp.lambda;

    ReportBuilder report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double s_prior = drift_sq * fstate.s_post[i] + diffusion;
        const double s_post = 1.0 / (1.0 / s_prior + g[i] * g[i]);
        if (!(s_post > 0.0) || !std::isfinite(s_post)) {
            throw std::logic_error("posterior variance left (0, inf) at index " + std::to_string(i));
        }
        fstate.s_post[i] = s_post;

        const double before = params[i];
        params[i] = keep * before + s_post * moments.gbar[i];
        fstate.mu[i] = params[i];
        report.add(s_post, params[i] - before);
    }
    return report.finish();
}

StepReport adabayes_ss_step(std::span<double> params, MomentState& mstate, std::span<const double> g,
                            const HyperParams& hp) {
    require_same_size(mstate.size(), params.size(), "parameter buffer");
    if (!(hp.eta > 0.0)) {
        throw std::invalid_argument("AdaBayes-SS requires eta > 0");
    }

    ++mstate.t;
    const auto [gbar, g2bar] = update_moments(mstate, g, hp);
    // 1/(2 sigma2) squared rather than 1/(4 sigma2^2) so huge sigma2 cannot overflow
    const double half_precision = 0.5 / hp.sigma2;
    const double inv_eta_sq = 1.0 / (hp.eta * hp.eta);
    const double keep = 1.0 - hp.lambda;

    ReportBuilder report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double precision = half_precision + std::sqrt(half_precision * half_precision + g2bar[i] * inv_eta_sq);
        const double s_post = 1.0 / precision;
        const double before = params[i];
        params[i] = keep * before + s_post * gbar[i];
        report.add(s_post, params[i] - before);
    }
    return report.finish();
}

FilterState init_filter_state(std::span<const double> initial_params, const HyperParams& hp) {
    FilterState state;
    state.mu.assign(initial_params.begin(), initial_params.end());
    state.s_post.assign(initial_params.size(), hp.sigma2);
    return state;
}

}  // namespace adabayes

#include "adabayes/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace adabayes {

std::string_view to_string(OptimizerKind kind) noexcept {
    switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::adabayes: return "adabayes";
    case OptimizerKind::adabayes_ss: return "adabayes_ss";
    }
    return "unknown";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) noexcept {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::adamw, OptimizerKind::adabayes,
                      OptimizerKind::adabayes_ss}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

Optimizer::Optimizer(OptimizerKind kind, HyperParams hp) : kind_(kind), hp_(hp) {
    hp_.validate();
    if (kind_ == OptimizerKind::adabayes_ss && !(hp_.eta > 0.0)) {
        throw std::invalid_argument("invalid hyperparameters: AdaBayes-SS requires eta > 0");
    }
}

std::size_t Optimizer::add_slot(std::span<const double> initial) {
    if (step_count() != 0) {
        throw std::logic_error("cannot register a parameter tensor after stepping");
    }
    SlotState slot{MomentState(initial.size()), std::nullopt};
    if (kind_ == OptimizerKind::adabayes) {
        slot.filter = init_filter_state(initial, hp_);
    }
    slots_.push_back(std::move(slot));
    return slots_.size() - 1;
}

std::uint64_t Optimizer::step_count() const noexcept {
    return slots_.empty() ? 0 : slots_.front().moments.t;
}

StepReport Optimizer::step(std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> grads) {
    if (params.size() != slots_.size() || grads.size() != slots_.size()) {
        throw std::invalid_argument("step expects " + std::to_string(slots_.size()) + " tensors, got " +
                                    std::to_string(params.size()) + " parameters and " +
                                    std::to_string(grads.size()) + " gradients");
    }
    // Check every gradient first so a bad tensor cannot leave slots half-stepped.
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].size() != slots_[i].moments.size() || params[i].size() != slots_[i].moments.size()) {
            throw std::invalid_argument("tensor " + std::to_string(i) + " does not match its registered size");
        }
        require_finite(grads[i]);
    }

    std::vector<StepReport> reports;
    std::vector<std::size_t> sizes;
    reports.reserve(slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        auto& slot = slots_[i];
        switch (kind_) {
        case OptimizerKind::sgd: reports.push_back(sgd_step(params[i], slot.moments, grads[i], hp_)); break;
        case OptimizerKind::adam: reports.push_back(adam_step(params[i], slot.moments, grads[i], hp_)); break;
        case OptimizerKind::adamw: reports.push_back(adamw_step(params[i], slot.moments, grads[i], hp_)); break;
        case OptimizerKind::adabayes:
            reports.push_back(adabayes_step(params[i], *slot.filter, slot.moments, grads[i], hp_));
            break;
        case OptimizerKind::adabayes_ss:
            reports.push_back(adabayes_ss_step(params[i], slot.moments, grads[i], hp_));
            break;
        }
        sizes.push_back(slot.moments.size());
    }
    return merge_reports(reports, sizes);
}

void Optimizer::restore(std::vector<SlotState> slots) {
    if (slots.size() != slots_.size()) {
        throw std::invalid_argument("restore: expected " + std::to_string(slots_.size()) + " slots, got " +
                                    std::to_string(slots.size()));
    }
    const std::uint64_t t = slots.empty() ? 0 : slots.front().moments.t;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& s = slots[i];
        const std::size_t n = slots_[i].moments.size();
        if (s.moments.m.size() != n || s.moments.v.size() != n) {
            throw std::invalid_argument("restore: slot " + std::to_string(i) + " has the wrong size");
        }
        if (s.moments.t != t) {
            throw std::invalid_argument("restore: slots disagree on the step counter");
        }
        if (s.filter.has_value() != (kind_ == OptimizerKind::adabayes)) {
            throw std::invalid_argument("restore: filter state presence does not match optimizer kind");
        }
        if (s.filter && (s.filter->mu.size() != n || s.filter->s_post.size() != n)) {
            throw std::invalid_argument("restore: slot " + std::to_string(i) + " filter state has the wrong size");
        }
    }
    slots_ = std::move(slots);
}

StepReport merge_reports(std::span<const StepReport> reports, std::span<const std::size_t> sizes) {
    StepReport out;
    double delta_sq = 0.0;
    double weighted = 0.0;
    std::size_t total = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        delta_sq += reports[i].delta_norm * reports[i].delta_norm;
        if (sizes[i] == 0) {
            continue;
        }
        weighted += reports[i].s_post_mean * static_cast<double>(sizes[i]);
        total += sizes[i];
        lo = std::min(lo, reports[i].s_post_min);
        hi = std::max(hi, reports[i].s_post_max);
    }
    out.delta_norm = std::sqrt(delta_sq);
    if (total > 0) {
        out.s_post_min = lo;
        out.s_post_max = hi;
        out.s_post_mean = std::clamp(weighted / static_cast<double>(total), lo, hi);
    }
    return out;
}

}  // namespace adabayes

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adabayes/hyper_params.hpp"
#include "adabayes/step_rules.hpp"

namespace adabayes {

enum class OptimizerKind { sgd, adam, adamw, adabayes, adabayes_ss };

std::string_view to_string(OptimizerKind kind) noexcept;
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) noexcept;

/// State for one registered parameter tensor.
struct SlotState {
    MomentState moments;
    std::optional<FilterState> filter;  // engaged for AdaBayes only
};

/// Drives one step rule over a list of (parameter tensor, state) pairs.
/// All slots advance together, so the step counter is shared.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, HyperParams hp);

    /// Registers a tensor; returns its slot index. Must precede the first step.
    std::size_t add_slot(std::span<const double> initial);

    /// `params[i]` and `grads[i]` belong to slot i. Gradients use the ascent
    /// convention (negated loss gradient).
    StepReport step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

    OptimizerKind kind() const noexcept { return kind_; }
    const HyperParams& hyper_params() const noexcept { return hp_; }
    std::uint64_t step_count() const noexcept;
    const std::vector<SlotState>& slots() const noexcept { return slots_; }

    /// Replaces all slot state, e.g. from a checkpoint. Shapes and the
    /// presence of filter state must match the registered slots.
    void restore(std::vector<SlotState> slots);

private:
    OptimizerKind kind_;
    HyperParams hp_;
    std::vector<SlotState> slots_;
};

/// Combines per-slot reports: norms add in quadrature, the rate mean is
/// weighted by slot size.
StepReport merge_reports(std::span<const StepReport> reports, std::span<const std::size_t> sizes);

}  // namespace adabayes

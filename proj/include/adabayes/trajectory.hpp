#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adabayes/optimizer.hpp"
#include "adabayes/problem.hpp"

namespace adabayes::bench {

/// Loss magnitude beyond which a run is declared diverged.
inline constexpr double kDivergenceThreshold = 1e12;

struct StepRecord {
    std::uint64_t step = 0;
    double train_loss = 0.0;  ///< full-dataset summed loss after the step
    double grad_norm = 0.0;   ///< norm of the minibatch loss gradient used by the step
    double s_post_mean = 0.0;
    double s_post_min = 0.0;
    double s_post_max = 0.0;
    double param_norm = 0.0;  ///< after the step

    bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
    std::vector<StepRecord> records;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::optional<std::uint64_t> steps_to_threshold;
    bool diverged = false;
};

struct RunSettings {
    std::size_t steps = 1000;
    std::size_t batch_size = 1;       ///< ignored by deterministic problems
    std::uint64_t seed = 0;           ///< parameter init and minibatch sampling
    double relative_threshold = 1e-2; ///< steps_to_threshold: first loss <= threshold * initial
};

/// Everything needed to resume a run exactly.
struct RunnerState {
    std::uint64_t step = 0;
    std::vector<double> params;
    std::vector<SlotState> slots;
    std::string rng_state;
};

/// Steps one optimizer over one problem. Minibatches are drawn uniformly
/// with replacement from a generator seeded by the run seed. The problem's
/// loss gradient is negated before reaching the optimizer.
class TrajectoryRunner {
public:
    TrajectoryRunner(ProblemPtr problem, OptimizerKind kind, const HyperParams& hp, const RunSettings& settings);

    /// One step. Returns std::nullopt, without touching any state, when the
    /// minibatch loss or gradient at the current point is non-finite.
    std::optional<StepRecord> step();

    std::span<const double> params() const noexcept { return params_; }
    const Optimizer& optimizer() const noexcept { return optimizer_; }
    const Problem& problem() const noexcept { return *problem_; }
    std::uint64_t steps_done() const noexcept { return step_; }

    RunnerState snapshot() const;
    void restore(const RunnerState& state);

private:
    ProblemPtr problem_;
    std::vector<ParamBlock> blocks_;
    Optimizer optimizer_;
    std::size_t batch_size_;
    std::vector<double> params_;
    std::mt19937_64 rng_;
    std::uint64_t step_ = 0;
    std::vector<std::size_t> batch_;
    std::vector<double> grad_;
};

/// Runs `settings.steps` steps, stopping early when the loss becomes
/// non-finite or exceeds kDivergenceThreshold. The observer, if set, sees the
/// parameters after every completed step.
using StepObserver = std::function<void(std::uint64_t step, std::span<const double> params)>;

Trajectory run_trajectory(ProblemPtr problem, OptimizerKind kind, const HyperParams& hp,
                          const RunSettings& settings, const StepObserver& observer = {});

/// Same, continuing from an existing runner.
Trajectory run_trajectory(TrajectoryRunner& runner, std::size_t steps, double relative_threshold,
                          const StepObserver& observer = {});

}  // namespace adabayes::bench

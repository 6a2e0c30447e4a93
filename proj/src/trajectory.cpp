#include "adabayes/trajectory.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace adabayes::bench {

namespace {

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

bool diverging(double loss) {
    return !std::isfinite(loss) || loss > kDivergenceThreshold;
}

}  // namespace

TrajectoryRunner::TrajectoryRunner(ProblemPtr problem, OptimizerKind kind, const HyperParams& hp,
                                   const RunSettings& settings)
    : problem_(std::move(problem)),
      blocks_(problem_->blocks()),
      optimizer_(kind, hp),
      batch_size_(settings.batch_size),
      params_(problem_->initial_params(settings.seed)),
      rng_(settings.seed),
      grad_(problem_->dim()) {
    if (problem_->dataset_size() > 0 && (batch_size_ == 0 || batch_size_ > problem_->dataset_size())) {
        throw std::invalid_argument("batch size " + std::to_string(batch_size_) + " must lie in [1, " +
                                    std::to_string(problem_->dataset_size()) + "]");
    }
    for (const auto& block : blocks_) {
        optimizer_.add_slot(std::span<const double>(params_).subspan(block.offset, block.size));
    }
}

std::optional<StepRecord> TrajectoryRunner::step() {
    const std::size_t n = problem_->dataset_size();
    const auto rng_before = rng_;
    batch_.clear();
    if (n > 0) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t k = 0; k < batch_size_; ++k) {
            batch_.push_back(pick(rng_));
        }
    }

    const double batch_loss = problem_->evaluate(params_, batch_, grad_);
    if (!std::isfinite(batch_loss) || !all_finite(grad_)) {
        rng_ = rng_before;
        return std::nullopt;
    }
    const double grad_norm = l2_norm(grad_);
    for (double& g : grad_) {
        g = -g;
    }

    std::vector<std::span<double>> param_views;
    std::vector<std::span<const double>> grad_views;
    for (const auto& block : blocks_) {
        param_views.push_back(std::span<double>(params_).subspan(block.offset, block.size));
        grad_views.push_back(std::span<const double>(grad_).subspan(block.offset, block.size));
    }
    const StepReport report = optimizer_.step(param_views, grad_views);
    ++step_;

    StepRecord record;
    record.step = step_;
    record.train_loss = problem_->loss(params_);
    record.grad_norm = grad_norm;
    record.s_post_mean = report.s_post_mean;
    record.s_post_min = report.s_post_min;
    record.s_post_max = report.s_post_max;
    record.param_norm = l2_norm(params_);
    return record;
}

RunnerState TrajectoryRunner::snapshot() const {
    std::ostringstream rng_text;
    rng_text << rng_;
    return {step_, params_, optimizer_.slots(), rng_text.str()};
}

void TrajectoryRunner::restore(const RunnerState& state) {
    if (state.params.size() != params_.size()) {
        throw std::invalid_argument("restore: parameter count mismatch");
    }
    std::mt19937_64 rng;
    std::istringstream rng_text(state.rng_state);
    rng_text >> rng;
    if (!rng_text) {
        throw std::invalid_argument("restore: unreadable generator state");
    }
    optimizer_.restore(state.slots);
    params_ = state.params;
    rng_ = rng;
    step_ = state.step;
}

Trajectory run_trajectory(TrajectoryRunner& runner, std::size_t steps, double relative_threshold,
                          const StepObserver& observer) {
    Trajectory out;
    out.initial_loss = runner.problem().loss(runner.params());
    out.final_loss = out.initial_loss;
    if (diverging(out.initial_loss)) {
        out.diverged = true;
        return out;
    }
    out.records.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        auto record = runner.step();
        if (!record) {
            out.diverged = true;
            break;
        }
        out.records.push_back(*record);
        out.final_loss = record->train_loss;
        if (observer) {
            observer(record->step, runner.params());
        }
        if (!out.steps_to_threshold && record->train_loss <= relative_threshold * out.initial_loss) {
            out.steps_to_threshold = record->step;
        }
        if (diverging(record->train_loss)) {
            out.diverged = true;
            break;
        }
    }
    return out;
}

Trajectory run_trajectory(ProblemPtr problem, OptimizerKind kind, const HyperParams& hp,
                          const RunSettings& settings, const StepObserver& observer) {
    if (settings.steps == 0) {
        throw std::invalid_argument("run_trajectory: steps must be >= 1");
    }
    TrajectoryRunner runner(std::move(problem), kind, hp, settings);
    return run_trajectory(runner, settings.steps, settings.relative_threshold, observer);
}

}  // namespace adabayes::bench

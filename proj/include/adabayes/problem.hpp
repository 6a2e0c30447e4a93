#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace adabayes::bench {

/// A contiguous range of the flat parameter vector that an optimizer treats
/// as one tensor.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// A differentiable objective. Losses are SUMMED over the minibatch and the
/// gradient is the gradient of that sum (not of the mean).
///
/// Problems are immutable after construction and may be shared across threads.
class Problem {
public:
    virtual ~Problem() = default;

    virtual std::string_view name() const noexcept = 0;
    virtual std::size_t dim() const noexcept = 0;

    /// Number of examples; 0 for deterministic problems.
    virtual std::size_t dataset_size() const noexcept { return 0; }

    /// Loss over the examples in `batch` (an empty batch means the whole
    /// dataset) with its gradient written to `grad`. Deterministic problems
    /// ignore `batch`.
    virtual double evaluate(std::span<const double> params, std::span<const std::size_t> batch,
                            std::span<double> grad) const = 0;

    /// Loss only; the default evaluates the gradient and discards it.
    virtual double loss(std::span<const double> params, std::span<const std::size_t> batch = {}) const;

    /// Tensor layout for multi-tensor optimizer wiring. Default: one block.
    virtual std::vector<ParamBlock> blocks() const;

    /// Deterministic starting point.
    virtual std::vector<double> initial_params(std::uint64_t seed) const = 0;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// Features are stored row-major, n rows of d columns.
struct SyntheticDataset {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> features;
    std::vector<std::uint8_t> labels;
    std::vector<double> true_weights;
    std::uint64_t seed = 0;

    std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
};

/// 0.5 (w - w*)^T A (w - w*) with diagonal A whose eigenvalues are log-spaced
/// over [1, condition_number] and w* ~ N(0, I) drawn from `seed`. Starts at 0.
ProblemPtr make_quadratic(std::size_t dim, double condition_number, std::uint64_t seed);

/// Same objective with explicit curvature and minimizer.
ProblemPtr make_quadratic(std::vector<double> diagonal, std::vector<double> minimizer);

/// (1 - x)^2 + 100 (y - x^2)^2, started from (-1.2, 1).
ProblemPtr make_rosenbrock();

/// Binary logistic regression with summed negative log-likelihood. Features
/// are standard normal, labels are drawn from the logistic model with
/// N(0, I) true weights. Starts at 0.
std::pair<ProblemPtr, SyntheticDataset> make_logreg(std::size_t n, std::size_t d, std::uint64_t seed);

enum class MlpTargets {
    teacher,  ///< outputs of a randomly initialized network of the same shape
    zero,
};

/// tanh MLP with a linear output layer and summed loss 0.5 ||y - target||^2.
/// `layer_sizes` = {inputs, hidden..., outputs} with at least one hidden
/// layer. Each layer contributes a weight block (out x in, row-major) and a
/// bias block. Weights initialize as N(0, 1/fan_in), biases at 0.
ProblemPtr make_mlp(std::vector<std::size_t> layer_sizes, std::size_t n, std::uint64_t seed,
                    MlpTargets targets = MlpTargets::teacher);

using LossAndGradient = std::function<double(std::span<const double>, std::span<double>)>;

/// Deterministic problem from a callable, mostly for tests.
ProblemPtr make_function_problem(std::size_t dim, LossAndGradient fn, std::vector<double> start = {});

/// Central differences of the full-batch loss, with per-coordinate step
/// h * max(1, |w_i|).
std::vector<double> finite_diff_grad(const Problem& problem, std::span<const double> params, double h = 1e-5);

/// Worst per-coordinate |a - b| / max(|a|, |b|, 1) between two gradients.
double max_gradient_error(std::span<const double> analytic, std::span<const double> numeric);

}  // namespace adabayes::bench

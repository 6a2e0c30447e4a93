#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adabayes/hyper_params.hpp"
#include "adabayes/optimizer.hpp"
#include "adabayes/problem.hpp"
#include "adabayes/trajectory.hpp"

namespace adabayes::cli {

/// Parse or validation failure; `line` is 0 when not tied to a line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, std::string key, const std::string& message);

    std::size_t line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    std::size_t line_;
    std::string key_;
};

struct ProblemSpec {
    std::string name;
    std::uint64_t seed = 1;
    std::size_t dim = 10;                        // quadratic
    double condition = 10.0;                     // quadratic
    std::size_t n = 1000;                        // logreg, mlp
    std::size_t d = 20;                          // logreg
    std::vector<std::size_t> layers{2, 16, 1};   // mlp
};

/// Per-optimizer overrides; unset fields take the per-kind defaults.
struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::sgd;
    std::string label;
    std::size_t line = 0;
    std::optional<double> eta;
    std::optional<double> eta_sgd;
    std::optional<double> sigma2;
    std::optional<double> lambda;
    std::optional<double> l2;
    std::optional<double> beta1;
    std::optional<double> beta2;
    std::optional<double> eps;
};

struct SweepSpec {
    double sigma2 = 1e-3;
    double eta = 1e-3;
    std::string grid = "default";
};

struct ExperimentConfig {
    ProblemSpec problem;
    std::vector<OptimizerSpec> optimizers;
    std::size_t steps = 1000;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double threshold = 1e-2;
    std::size_t jobs = 1;
    std::string output_dir = "results";
    std::optional<SweepSpec> sweep;
};

/// Parses the line-oriented `key = value` format. `#` starts a comment. Each
/// `optimizer.kind` line opens a new optimizer block that the following
/// `optimizer.*` keys apply to. Unknown, duplicate, or inapplicable keys are
/// rejected with the line number.
ExperimentConfig parse_config(std::string_view text);

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

/// Minibatch size seen by the optimizers: 1 (full batch) for deterministic
/// problems, run.batch_size otherwise.
std::size_t effective_batch_size(const ExperimentConfig& config);

/// Defaults by kind, then overrides. sigma2 defaults to eta_sgd / B.
HyperParams resolve_hyper_params(const ExperimentConfig& config, const OptimizerSpec& spec);

bench::ProblemPtr build_problem(const ProblemSpec& spec);

bench::RunSettings run_settings(const ExperimentConfig& config);

}  // namespace adabayes::cli

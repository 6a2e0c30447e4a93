#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adabayes/config.hpp"
#include "adabayes/filter_analysis.hpp"
#include "adabayes/trajectory.hpp"

namespace adabayes::cli {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kTrajectoryHeader =
    "step,train_loss,grad_norm,s_post_mean,s_post_min,s_post_max,param_norm";
inline constexpr std::string_view kSweepHeader = "x,s_ss,s_low,s_high";
inline constexpr const char* kOutputDirEnv = "ADABAYES_OUTPUT_DIR";

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3 };

/// Output file could not be written or input could not be read.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CellResult {
    std::string label;
    OptimizerKind kind = OptimizerKind::sgd;
    std::filesystem::path csv_path;
    std::filesystem::path checkpoint_path;
    std::size_t steps_run = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::optional<std::uint64_t> steps_to_threshold;
    bool diverged = false;
};

struct ResultBundle {
    std::string config_echo;
    std::filesystem::path output_dir;
    std::vector<CellResult> cells;
    std::optional<std::filesystem::path> sweep_path;
    std::filesystem::path manifest_path;
    double wall_seconds = 0.0;
};

void write_trajectory_csv(std::ostream& out, const bench::Trajectory& trajectory);
void write_sweep_csv(std::ostream& out, std::span<const analysis::SweepRow> rows);

/// "default" -> 200 log-spaced points over [sigma2/1e3, sigma2*1e3];
/// "lo:hi:n" -> n log-spaced points; otherwise a comma-separated list.
/// Throws ConfigError naming the offending entry.
std::vector<double> parse_grid(std::string_view spec, double sigma2);

/// Runs every optimizer cell of the config and writes `<label>.csv`,
/// `<label>.ckpt`, `config.echo`, an optional `sweep.csv` and `result.json`
/// under the output directory (overridable via ADABAYES_OUTPUT_DIR).
/// Throws ConfigError or IoError.
ResultBundle cmd_run(const std::filesystem::path& config_path);
ResultBundle cmd_run_text(std::string_view config_text, std::optional<std::filesystem::path> output_dir = {});

/// Writes the steady-state sweep CSV.
void cmd_sweep(double sigma2, double eta, std::string_view grid_spec, const std::filesystem::path& out_path);

struct VerifyResult {
    bool identical = false;
    std::string detail;
};

/// Reloads a checkpoint, continues one step, and compares against a fresh
/// run of the same config taken to the same step. Throws CheckpointError for
/// unreadable input.
VerifyResult cmd_checkpoint_verify(const std::filesystem::path& checkpoint_path);

/// CLI entry point (used by tools/adabayes.cpp and the CLI tests).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace adabayes::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "adabayes/optimizer.hpp"
#include "adabayes/trajectory.hpp"

namespace adabayes::cli {

inline constexpr int kCheckpointVersion = 1;

/// Unreadable, truncated, or wrong-version checkpoint.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Resumable snapshot of one optimizer cell. Reals are stored in shortest
/// round-trip decimal, so a reload is bit-exact.
struct Checkpoint {
    int version = kCheckpointVersion;
    std::string label;
    OptimizerKind kind = OptimizerKind::sgd;
    std::string config_text;  ///< canonical config that produced the run
    bench::RunnerState state;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);

/// Reads a whole checkpoint or throws CheckpointError; never returns
/// partially filled state.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adabayes::cli

#include "adabayes/commands.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "adabayes/checkpoint.hpp"
#include "adabayes/text_format.hpp"

namespace adabayes::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.flush();
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
}

CellResult run_cell(const ExperimentConfig& config, const std::string& echo, const OptimizerSpec& spec,
                    const fs::path& dir) {
    bench::TrajectoryRunner runner(build_problem(config.problem), spec.kind, resolve_hyper_params(config, spec),
                                   run_settings(config));
    const auto trajectory = bench::run_trajectory(runner, config.steps, config.threshold);

    CellResult cell;
    cell.label = spec.label;
    cell.kind = spec.kind;
    cell.csv_path = dir / (spec.label + ".csv");
    cell.checkpoint_path = dir / (spec.label + ".ckpt");
    cell.steps_run = trajectory.records.size();
    cell.initial_loss = trajectory.initial_loss;
    cell.final_loss = trajectory.final_loss;
    cell.steps_to_threshold = trajectory.steps_to_threshold;
    cell.diverged = trajectory.diverged;

    std::ostringstream csv;
    write_trajectory_csv(csv, trajectory);
    write_file(cell.csv_path, csv.str());

    Checkpoint checkpoint;
    checkpoint.label = spec.label;
    checkpoint.kind = spec.kind;
    checkpoint.config_text = echo;
    checkpoint.state = runner.snapshot();
    std::ostringstream ckpt;
    write_checkpoint(ckpt, checkpoint);
    write_file(cell.checkpoint_path, ckpt.str());
    return cell;
}

nlohmann::json to_json(const ResultBundle& bundle) {
    nlohmann::json cells = nlohmann::json::array();
    bool any_diverged = false;
    for (const auto& c : bundle.cells) {
        any_diverged = any_diverged || c.diverged;
        cells.push_back({
            {"label", c.label},
            {"kind", std::string(to_string(c.kind))},
            {"trajectory_csv", c.csv_path.filename().string()},
            {"checkpoint", c.checkpoint_path.filename().string()},
            {"steps_run", c.steps_run},
            {"initial_loss", c.initial_loss},
            {"final_loss", c.final_loss},
            {"steps_to_threshold", c.steps_to_threshold ? nlohmann::json(*c.steps_to_threshold) : nlohmann::json()},
            {"diverged", c.diverged},
        });
    }
    return {
        {"config_echo", bundle.config_echo},
        {"cells", cells},
        {"sweep_csv", bundle.sweep_path ? nlohmann::json(bundle.sweep_path->filename().string()) : nlohmann::json()},
        {"metadata",
         {
             {"version", std::string(kVersion)},
             {"wall_seconds", bundle.wall_seconds},
             {"divergence_threshold", bench::kDivergenceThreshold},
             {"any_diverged", any_diverged},
         }},
    };
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) {
            return false;
        }
    }
    return true;
}

bool same_bits(const bench::StepRecord& a, const bench::StepRecord& b) {
    const double av[] = {a.train_loss, a.grad_norm, a.s_post_mean, a.s_post_min, a.s_post_max, a.param_norm};
    const double bv[] = {b.train_loss, b.grad_norm, b.s_post_mean, b.s_post_min, b.s_post_max, b.param_norm};
    return a.step == b.step && same_bits(av, bv);
}

// Empty string when identical, otherwise the first difference.
std::string compare_states(const bench::RunnerState& a, const bench::RunnerState& b) {
    if (a.step != b.step) {
        return "step counters differ";
    }
    if (!same_bits(a.params, b.params)) {
        return "parameters differ";
    }
    if (a.rng_state != b.rng_state) {
        return "minibatch generator states differ";
    }
    if (a.slots.size() != b.slots.size()) {
        return "slot counts differ";
    }
    for (std::size_t i = 0; i < a.slots.size(); ++i) {
        const auto& x = a.slots[i];
        const auto& y = b.slots[i];
        const std::string where = " in slot " + std::to_string(i);
        if (x.moments.t != y.moments.t || !same_bits(x.moments.m, y.moments.m) || !same_bits(x.moments.v, y.moments.v)) {
            return "moment state differs" + where;
        }
        if (x.filter.has_value() != y.filter.has_value()) {
            return "filter state presence differs" + where;
        }
        if (x.filter && (!same_bits(x.filter->mu, y.filter->mu) || !same_bits(x.filter->s_post, y.filter->s_post))) {
            return "filter state differs" + where;
        }
    }
    return {};
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const bench::Trajectory& trajectory) {
    out << kTrajectoryHeader << '\n';
    for (const auto& r : trajectory.records) {
        out << r.step << ',' << format_real(r.train_loss) << ',' << format_real(r.grad_norm) << ','
            << format_real(r.s_post_mean) << ',' << format_real(r.s_post_min) << ',' << format_real(r.s_post_max)
            << ',' << format_real(r.param_norm) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const analysis::SweepRow> rows) {
    out << kSweepHeader << '\n';
    for (const auto& r : rows) {
        out << format_real(r.x) << ',' << format_real(r.s_ss) << ',' << format_real(r.s_low) << ','
            << format_real(r.s_high) << '\n';
    }
}

std::vector<double> parse_grid(std::string_view spec, double sigma2) {
    spec = trim(spec);
    if (spec == "default") {
        return analysis::default_sweep_grid(sigma2);
    }
    if (spec.find(':') != std::string_view::npos) {
        const auto a = spec.find(':');
        const auto b = spec.find(':', a + 1);
        if (b == std::string_view::npos) {
            throw ConfigError(0, "grid", "range grid must look like lo:hi:n");
        }
        const auto lo = parse_real(spec.substr(0, a));
        const auto hi = parse_real(spec.substr(a + 1, b - a - 1));
        const auto n = parse_unsigned(spec.substr(b + 1));
        if (!lo || !hi || !n || !(*lo > 0.0) || !(*hi > *lo) || *n < 2) {
            throw ConfigError(0, "grid", "range grid needs 0 < lo < hi and n >= 2");
        }
        return analysis::log_grid(*lo, *hi, *n);
    }
    std::vector<double> grid;
    std::size_t row = 0;
    while (true) {
        const auto comma = spec.find(',');
        const auto token = spec.substr(0, comma);
        const auto value = parse_real(token);
        if (!value) {
            throw ConfigError(0, "grid", "row " + std::to_string(row) + ": '" + std::string(trim(token)) +
                                             "' is not a number");
        }
        grid.push_back(*value);
        ++row;
        if (comma == std::string_view::npos) {
            break;
        }
        spec.remove_prefix(comma + 1);
    }
    return grid;
}

ResultBundle cmd_run(const fs::path& config_path) {
    return cmd_run_text(read_file(config_path));
}

ResultBundle cmd_run_text(std::string_view config_text, std::optional<fs::path> output_dir) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig config = parse_config(config_text);
    const std::string echo = serialize_config(config);

    ResultBundle bundle;
    bundle.config_echo = echo;
    if (output_dir) {
        bundle.output_dir = *output_dir;
    } else if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        bundle.output_dir = env;
    } else {
        bundle.output_dir = config.output_dir;
    }
    std::error_code ec;
    fs::create_directories(bundle.output_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + bundle.output_dir.string() + "': " + ec.message());
    }
    write_file(bundle.output_dir / "config.echo", echo);

    // Cells are independent; each owns its runner and files, so the worker
    // count never changes output bytes.
    const std::size_t cells = config.optimizers.size();
    std::vector<CellResult> results(cells);
    std::vector<std::exception_ptr> errors(cells);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells; i = next++) {
            try {
                results[i] = run_cell(config, echo, config.optimizers[i], bundle.output_dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(config.jobs, cells);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    bundle.cells = std::move(results);

    if (config.sweep) {
        const auto path = bundle.output_dir / "sweep.csv";
        cmd_sweep(config.sweep->sigma2, config.sweep->eta, config.sweep->grid, path);
        bundle.sweep_path = path;
    }

    bundle.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bundle.manifest_path = bundle.output_dir / "result.json";
    write_file(bundle.manifest_path, to_json(bundle).dump(2) + "\n");
    return bundle;
}

void cmd_sweep(double sigma2, double eta, std::string_view grid_spec, const fs::path& out_path) {
    std::vector<analysis::SweepRow> rows;
    try {
        rows = analysis::steady_state_sweep(sigma2, eta, parse_grid(grid_spec, sigma2));
    } catch (const std::domain_error& e) {
        throw ConfigError(0, "sweep", e.what());
    }
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    if (out_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(out_path.parent_path(), ec);
    }
    write_file(out_path, csv.str());
}

VerifyResult cmd_checkpoint_verify(const fs::path& checkpoint_path) {
    Checkpoint checkpoint;
    try {
        checkpoint = load_checkpoint(checkpoint_path);
    } catch (const std::ios_base::failure& e) {
        throw IoError(e.what());
    }
    const ExperimentConfig config = parse_config(checkpoint.config_text);
    const OptimizerSpec* spec = nullptr;
    for (const auto& o : config.optimizers) {
        if (o.label == checkpoint.label) {
            spec = &o;
        }
    }
    if (spec == nullptr || spec->kind != checkpoint.kind) {
        throw CheckpointError("checkpoint label '" + checkpoint.label + "' does not match its embedded config");
    }

    const auto problem = build_problem(config.problem);
    const auto hp = resolve_hyper_params(config, *spec);
    const auto settings = run_settings(config);

    bench::TrajectoryRunner fresh(problem, spec->kind, hp, settings);
    for (std::uint64_t k = 0; k < checkpoint.state.step; ++k) {
        if (!fresh.step()) {
            return {false, "uncheckpointed run stopped at step " + std::to_string(k + 1)};
        }
    }
    if (auto diff = compare_states(fresh.snapshot(), checkpoint.state); !diff.empty()) {
        return {false, "checkpoint does not match a fresh run at step " + std::to_string(checkpoint.state.step) +
                           ": " + diff};
    }

    bench::TrajectoryRunner resumed(problem, spec->kind, hp, settings);
    try {
        resumed.restore(checkpoint.state);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint state does not fit the problem: ") + e.what());
    }

    const auto expected = fresh.step();
    const auto actual = resumed.step();
    const std::string at = "step " + std::to_string(checkpoint.state.step + 1);
    if (!expected || !actual) {
        return {false, at + " could not be taken (non-finite loss)"};
    }
    if (!same_bits(*expected, *actual)) {
        return {false, at + ": step records differ"};
    }
    if (auto diff = compare_states(fresh.snapshot(), resumed.snapshot()); !diff.empty()) {
        return {false, at + ": " + diff};
    }
    return {true, at + " reproduced bit-for-bit"};
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian-filtering optimizers: benchmark runs, steady-state sweeps, checkpoint checks"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run every optimizer in a config file");
    run->add_option("config", config_path, "Config file")->required();

    double sigma2 = 1e-3;
    double eta = 1e-3;
    std::string grid = "default";
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "Write the steady-state learning-rate sweep as CSV");
    sweep->add_option("--sigma2", sigma2, "Prior variance")->required();
    sweep->add_option("--eta", eta, "Diffusion width / Adam-scale learning rate")->required();
    sweep->add_option("--grid", grid, "'default', 'lo:hi:n' (log-spaced) or a comma list of x values");
    sweep->add_option("--out", sweep_out, "Output CSV path")->required();

    std::string checkpoint_path;
    auto* verify = app.add_subcommand("checkpoint-verify", "Resume a checkpoint one step and compare bit-for-bit");
    verify->add_option("path", checkpoint_path, "Checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            const auto bundle = cmd_run(config_path);
            for (const auto& c : bundle.cells) {
                out << c.label << ": " << c.steps_run << " steps, final loss " << format_real(c.final_loss)
                    << (c.diverged ? " (diverged)" : "") << '\n';
            }
            out << "results in " << bundle.output_dir.string() << '\n';
        } else if (*sweep) {
            cmd_sweep(sigma2, eta, grid, sweep_out);
            out << "wrote " << sweep_out << '\n';
        } else if (*verify) {
            const auto result = cmd_checkpoint_verify(checkpoint_path);
            (result.identical ? out : err) << result.detail << '\n';
            return result.identical ? kExitOk : kExitFailure;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace adabayes::cli

#include "adabayes/config.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "adabayes/filter_analysis.hpp"
#include "adabayes/text_format.hpp"

namespace adabayes::cli {

namespace {

std::string located(std::size_t line, const std::string& key, const std::string& message) {
    std::string out = "config";
    if (line > 0) {
        out += ":" + std::to_string(line);
    }
    if (!key.empty()) {
        out += ": key '" + key + "'";
    }
    return out + ": " + message;
}

const std::set<std::string, std::less<>> kProblemNames{"quadratic", "rosenbrock", "logreg", "mlp"};

// Problem keys that only make sense for some problems.
const std::map<std::string, std::set<std::string>, std::less<>> kProblemKeyOwners{
    {"problem.dim", {"quadratic"}},
    {"problem.condition", {"quadratic"}},
    {"problem.n", {"logreg", "mlp"}},
    {"problem.d", {"logreg"}},
    {"problem.layers", {"mlp"}},
};

bool is_filter(OptimizerKind k) {
    return k == OptimizerKind::adabayes || k == OptimizerKind::adabayes_ss;
}

// Which optimizer.* keys each rule actually reads.
bool optimizer_key_applies(OptimizerKind kind, std::string_view field) {
    if (field == "eta" || field == "beta1" || field == "beta2" || field == "eta_sgd" || field == "sigma2") {
        return true;
    }
    if (field == "eps") {
        return kind == OptimizerKind::adam || kind == OptimizerKind::adamw;
    }
    if (field == "l2") {
        return kind == OptimizerKind::sgd || kind == OptimizerKind::adam;
    }
    if (field == "lambda") {
        return kind == OptimizerKind::adamw || is_filter(kind);
    }
    return false;
}

class Parser {
public:
    ExperimentConfig run(std::string_view text) {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++line_no;
            handle_line(line_no, raw);
            if (nl == std::string_view::npos) {
                break;
            }
            pos = nl + 1;
        }
        finish();
        return std::move(config_);
    }

private:
    void handle_line(std::size_t line, std::string_view raw) {
        auto content = raw.substr(0, raw.find('#'));
        content = trim(content);
        if (content.empty()) {
            return;
        }
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(line, "", "expected 'key = value'");
        }
        const std::string key(trim(content.substr(0, eq)));
        const auto value = trim(content.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(line, "", "missing key before '='");
        }
        if (value.empty()) {
            throw ConfigError(line, key, "missing value");
        }
        if (key.rfind("optimizer.", 0) == 0) {
            handle_optimizer(line, key, value);
            return;
        }
        if (!seen_.insert(key).second) {
            throw ConfigError(line, key, "duplicate key");
        }
        key_lines_[key] = line;
        handle_global(line, key, value);
    }

    double real(std::size_t line, const std::string& key, std::string_view value) {
        auto v = parse_real(value);
        if (!v) {
            throw ConfigError(line, key, "expected a real number, got '" + std::string(value) + "'");
        }
        return *v;
    }

    std::uint64_t integer(std::size_t line, const std::string& key, std::string_view value) {
        auto v = parse_unsigned(value);
        if (!v) {
            throw ConfigError(line, key, "expected a non-negative integer, got '" + std::string(value) + "'");
        }
        return *v;
    }

    SweepSpec& sweep() {
        if (!config_.sweep) {
            config_.sweep.emplace();
        }
        return *config_.sweep;
    }

    void handle_global(std::size_t line, const std::string& key, std::string_view value) {
        auto& p = config_.problem;
        if (key == "problem.name") {
            p.name = std::string(value);
        } else if (key == "problem.seed") {
            p.seed = integer(line, key, value);
        } else if (key == "problem.dim") {
            p.dim = integer(line, key, value);
        } else if (key == "problem.condition") {
            p.condition = real(line, key, value);
        } else if (key == "problem.n") {
            p.n = integer(line, key, value);
        } else if (key == "problem.d") {
            p.d = integer(line, key, value);
        } else if (key == "problem.layers") {
            p.layers.clear();
            std::string_view rest = value;
            while (true) {
                const auto comma = rest.find(',');
                p.layers.push_back(integer(line, key, rest.substr(0, comma)));
                if (comma == std::string_view::npos) {
                    break;
                }
                rest.remove_prefix(comma + 1);
            }
        } else if (key == "run.steps") {
            config_.steps = integer(line, key, value);
        } else if (key == "run.batch_size") {
            config_.batch_size = integer(line, key, value);
        } else if (key == "run.seed") {
            config_.seed = integer(line, key, value);
        } else if (key == "run.threshold") {
            config_.threshold = real(line, key, value);
        } else if (key == "run.jobs") {
            config_.jobs = integer(line, key, value);
        } else if (key == "output.dir") {
            config_.output_dir = std::string(value);
        } else if (key == "sweep.sigma2") {
            sweep().sigma2 = real(line, key, value);
        } else if (key == "sweep.eta") {
            sweep().eta = real(line, key, value);
        } else if (key == "sweep.grid") {
            sweep().grid = std::string(value);
        } else {
            throw ConfigError(line, key, "unknown key");
        }
    }

    void handle_optimizer(std::size_t line, const std::string& key, std::string_view value) {
        const std::string field = key.substr(std::string_view("optimizer.").size());
        if (field == "kind") {
            auto kind = parse_optimizer_kind(value);
            if (!kind) {
                throw ConfigError(line, key,
                                  "unknown optimizer '" + std::string(value) +
                                      "' (expected sgd, adam, adamw, adabayes or adabayes_ss)");
            }
            OptimizerSpec spec;
            spec.kind = *kind;
            spec.line = line;
            config_.optimizers.push_back(spec);
            block_keys_.clear();
            return;
        }
        if (config_.optimizers.empty()) {
            throw ConfigError(line, key, "appears before any optimizer.kind line");
        }
        auto& spec = config_.optimizers.back();
        if (!block_keys_.insert(field).second) {
            throw ConfigError(line, key, "duplicate key in this optimizer block");
        }
        if (field == "label") {
            spec.label = std::string(value);
            return;
        }
        std::optional<double>* slot = nullptr;
        if (field == "eta") slot = &spec.eta;
        else if (field == "eta_sgd") slot = &spec.eta_sgd;
        else if (field == "sigma2") slot = &spec.sigma2;
        else if (field == "lambda") slot = &spec.lambda;
        else if (field == "l2") slot = &spec.l2;
        else if (field == "beta1") slot = &spec.beta1;
        else if (field == "beta2") slot = &spec.beta2;
        else if (field == "eps") slot = &spec.eps;
        if (slot == nullptr) {
            throw ConfigError(line, key, "unknown key");
        }
        if (!optimizer_key_applies(spec.kind, field)) {
            throw ConfigError(line, key, "not used by optimizer '" + std::string(to_string(spec.kind)) + "'");
        }
        *slot = real(line, key, value);
    }

    std::size_t line_of(const std::string& key) const {
        const auto it = key_lines_.find(key);
        return it == key_lines_.end() ? 0 : it->second;
    }

    void finish() {
        auto& p = config_.problem;
        if (p.name.empty()) {
            throw ConfigError(0, "problem.name", "required key is missing");
        }
        if (!kProblemNames.contains(p.name)) {
            throw ConfigError(line_of("problem.name"), "problem.name",
                              "unknown problem '" + p.name + "' (expected quadratic, rosenbrock, logreg or mlp)");
        }
        for (const auto& [key, owners] : kProblemKeyOwners) {
            if (seen_.contains(key) && !owners.contains(p.name)) {
                throw ConfigError(line_of(key), key, "not used by problem '" + p.name + "'");
            }
        }
        if (config_.optimizers.empty()) {
            throw ConfigError(0, "optimizer.kind", "at least one optimizer is required");
        }
        if (config_.steps == 0) {
            throw ConfigError(line_of("run.steps"), "run.steps", "must be >= 1");
        }
        if (config_.jobs == 0) {
            throw ConfigError(line_of("run.jobs"), "run.jobs", "must be >= 1");
        }
        if (!(config_.threshold > 0.0)) {
            throw ConfigError(line_of("run.threshold"), "run.threshold", "must be > 0");
        }

        std::set<std::string> labels;
        for (auto& spec : config_.optimizers) {
            if (spec.label.empty()) {
                spec.label = std::string(to_string(spec.kind));
            }
            const bool safe = std::all_of(spec.label.begin(), spec.label.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
            });
            if (!safe || spec.label.front() == '.') {
                throw ConfigError(spec.line, "optimizer.label",
                                  "label '" + spec.label + "' must use only letters, digits, '_', '-', '.'");
            }
            if (!labels.insert(spec.label).second) {
                throw ConfigError(spec.line, "optimizer.label",
                                  "duplicate optimizer label '" + spec.label + "'; set optimizer.label");
            }
        }

        bench::ProblemPtr probe;
        try {
            probe = build_problem(p);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(line_of("problem.name"), "problem.name", e.what());
        }
        if (probe->dataset_size() > 0 &&
            (config_.batch_size == 0 || config_.batch_size > probe->dataset_size())) {
            throw ConfigError(line_of("run.batch_size"), "run.batch_size",
                              "must lie in [1, " + std::to_string(probe->dataset_size()) + "]");
        }
        for (const auto& spec : config_.optimizers) {
            try {
                const auto hp = resolve_hyper_params(config_, spec);
                Optimizer check(spec.kind, hp);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(spec.line, "optimizer.kind", e.what());
            }
        }
        if (config_.sweep) {
            try {
                analysis::SteadyStateQuery{config_.sweep->sigma2, config_.sweep->eta, 0.0}.validate();
            } catch (const std::domain_error& e) {
                throw ConfigError(line_of("sweep.sigma2"), "sweep.sigma2", e.what());
            }
        }
    }

    ExperimentConfig config_;
    std::set<std::string, std::less<>> seen_;
    std::map<std::string, std::size_t, std::less<>> key_lines_;
    std::set<std::string> block_keys_;
};

}  // namespace

ConfigError::ConfigError(std::size_t line, std::string key, const std::string& message)
    : std::runtime_error(located(line, key, message)), line_(line), key_(std::move(key)) {}

ExperimentConfig parse_config(std::string_view text) {
    return Parser{}.run(text);
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    const auto& p = c.problem;
    out << "problem.name = " << p.name << '\n';
    out << "problem.seed = " << p.seed << '\n';
    if (p.name == "quadratic") {
        out << "problem.dim = " << p.dim << '\n';
        out << "problem.condition = " << format_real(p.condition) << '\n';
    } else if (p.name == "logreg") {
        out << "problem.n = " << p.n << '\n';
        out << "problem.d = " << p.d << '\n';
    } else if (p.name == "mlp") {
        out << "problem.n = " << p.n << '\n';
        out << "problem.layers = ";
        for (std::size_t i = 0; i < p.layers.size(); ++i) {
            out << (i ? "," : "") << p.layers[i];
        }
        out << '\n';
    }
    out << "run.steps = " << c.steps << '\n';
    out << "run.batch_size = " << c.batch_size << '\n';
    out << "run.seed = " << c.seed << '\n';
    out << "run.threshold = " << format_real(c.threshold) << '\n';
    out << "run.jobs = " << c.jobs << '\n';
    out << "output.dir = " << c.output_dir << '\n';
    if (c.sweep) {
        out << "sweep.sigma2 = " << format_real(c.sweep->sigma2) << '\n';
        out << "sweep.eta = " << format_real(c.sweep->eta) << '\n';
        out << "sweep.grid = " << c.sweep->grid << '\n';
    }
    for (const auto& o : c.optimizers) {
        out << '\n' << "optimizer.kind = " << to_string(o.kind) << '\n';
        out << "optimizer.label = " << o.label << '\n';
        auto emit = [&](const char* name, const std::optional<double>& v) {
            if (v) {
                out << "optimizer." << name << " = " << format_real(*v) << '\n';
            }
        };
        emit("eta", o.eta);
        emit("eta_sgd", o.eta_sgd);
        emit("sigma2", o.sigma2);
        emit("lambda", o.lambda);
        emit("l2", o.l2);
        emit("beta1", o.beta1);
        emit("beta2", o.beta2);
        emit("eps", o.eps);
    }
    return out.str();
}

std::size_t effective_batch_size(const ExperimentConfig& config) {
    return (config.problem.name == "logreg" || config.problem.name == "mlp") ? config.batch_size : 1;
}

HyperParams resolve_hyper_params(const ExperimentConfig& config, const OptimizerSpec& spec) {
    HyperParams hp = HyperParams::defaults(effective_batch_size(config));
    switch (spec.kind) {
    case OptimizerKind::sgd:
    case OptimizerKind::adam:
        hp.lambda = 0.0;
        hp.l2 = 5e-4;
        break;
    case OptimizerKind::adamw:
    case OptimizerKind::adabayes:
    case OptimizerKind::adabayes_ss:
        hp.lambda = 5e-5;
        hp.l2 = 0.0;
        break;
    }
    hp.eta = spec.eta.value_or(hp.eta);
    hp.eta_sgd = spec.eta_sgd.value_or(hp.eta_sgd);
    hp.sigma2 = spec.sigma2.value_or(analysis::sigma2_from_sgd(hp.eta_sgd, hp.minibatch_size));
    hp.lambda = spec.lambda.value_or(hp.lambda);
    hp.l2 = spec.l2.value_or(hp.l2);
    hp.beta1 = spec.beta1.value_or(hp.beta1);
    hp.beta2 = spec.beta2.value_or(hp.beta2);
    hp.eps = spec.eps.value_or(hp.eps);
    return hp;
}

bench::ProblemPtr build_problem(const ProblemSpec& spec) {
    if (spec.name == "quadratic") {
        return bench::make_quadratic(spec.dim, spec.condition, spec.seed);
    }
    if (spec.name == "rosenbrock") {
        return bench::make_rosenbrock();
    }
    if (spec.name == "logreg") {
        return bench::make_logreg(spec.n, spec.d, spec.seed).first;
    }
    if (spec.name == "mlp") {
        return bench::make_mlp(spec.layers, spec.n, spec.seed);
    }
    throw std::invalid_argument("unknown problem '" + spec.name + "'");
}

bench::RunSettings run_settings(const ExperimentConfig& config) {
    bench::RunSettings s;
    s.steps = config.steps;
    s.batch_size = effective_batch_size(config);
    s.seed = config.seed;
    s.relative_threshold = config.threshold;
    return s;
}

}  // namespace adabayes::cli

#include "adabayes/problem.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace adabayes::bench {

double Problem::loss(std::span<const double> params, std::span<const std::size_t> batch) const {
    std::vector<double> scratch(dim());
    return evaluate(params, batch, scratch);
}

std::vector<ParamBlock> Problem::blocks() const {
    return {{"w", 0, dim()}};
}

namespace {

void check_sizes(const Problem& p, std::span<const double> params, std::span<double> grad) {
    if (params.size() != p.dim() || grad.size() != p.dim()) {
        throw std::invalid_argument(std::string(p.name()) + ": expected " + std::to_string(p.dim()) +
                                    " parameters and gradient entries");
    }
}

void check_batch(const Problem& p, std::span<const std::size_t> batch) {
    for (std::size_t idx : batch) {
        if (idx >= p.dataset_size()) {
            throw std::out_of_range(std::string(p.name()) + ": batch index " + std::to_string(idx) +
                                    " outside dataset of size " + std::to_string(p.dataset_size()));
        }
    }
}

class Quadratic final : public Problem {
public:
    Quadratic(std::vector<double> diagonal, std::vector<double> minimizer)
        : diag_(std::move(diagonal)), minimizer_(std::move(minimizer)) {
        if (diag_.size() != minimizer_.size() || diag_.empty()) {
            throw std::invalid_argument("quadratic: curvature and minimizer must have equal, nonzero size");
        }
    }

    std::string_view name() const noexcept override { return "quadratic"; }
    std::size_t dim() const noexcept override { return diag_.size(); }

    double evaluate(std::span<const double> params, std::span<const std::size_t>,
                    std::span<double> grad) const override {
        check_sizes(*this, params, grad);
        double loss = 0.0;
        for (std::size_t i = 0; i < diag_.size(); ++i) {
            const double r = params[i] - minimizer_[i];
            grad[i] = diag_[i] * r;
            loss += 0.5 * diag_[i] * r * r;
        }
        return loss;
    }

    std::vector<double> initial_params(std::uint64_t) const override { return std::vector<double>(dim(), 0.0); }

private:
    std::vector<double> diag_;
    std::vector<double> minimizer_;
};

class Rosenbrock final : public Problem {
public:
    std::string_view name() const noexcept override { return "rosenbrock"; }
    std::size_t dim() const noexcept override { return 2; }

    double evaluate(std::span<const double> p, std::span<const std::size_t>, std::span<double> grad) const override {
        check_sizes(*this, p, grad);
        const double x = p[0];
        const double y = p[1];
        const double a = 1.0 - x;
        const double b = y - x * x;
        grad[0] = -2.0 * a - 400.0 * x * b;
        grad[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    }

    std::vector<double> initial_params(std::uint64_t) const override { return {-1.2, 1.0}; }
};

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

class LogisticRegression final : public Problem {
public:
    explicit LogisticRegression(SyntheticDataset data) : data_(std::move(data)) {}

    std::string_view name() const noexcept override { return "logreg"; }
    std::size_t dim() const noexcept override { return data_.d; }
    std::size_t dataset_size() const noexcept override { return data_.n; }

    double evaluate(std::span<const double> w, std::span<const std::size_t> batch,
                    std::span<double> grad) const override {
        check_sizes(*this, w, grad);
        check_batch(*this, batch);
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        auto accumulate = [&](std::size_t i) {
            const auto x = data_.row(i);
            double z = 0.0;
            for (std::size_t j = 0; j < data_.d; ++j) {
                z += x[j] * w[j];
            }
            const double y = data_.labels[i];
            loss += softplus(z) - y * z;
            const double r = sigmoid(z) - y;
            for (std::size_t j = 0; j < data_.d; ++j) {
                grad[j] += r * x[j];
            }
        };
        if (batch.empty()) {
            for (std::size_t i = 0; i < data_.n; ++i) {
                accumulate(i);
            }
        } else {
            for (std::size_t i : batch) {
                accumulate(i);
            }
        }
        return loss;
    }

    std::vector<double> initial_params(std::uint64_t) const override { return std::vector<double>(dim(), 0.0); }

private:
    SyntheticDataset data_;
};

struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w_offset = 0;
    std::size_t b_offset = 0;
};

void draw_layer_params(std::vector<double>& params, const std::vector<Layer>& layers, std::mt19937_64& rng) {
    for (const auto& layer : layers) {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(layer.in)));
        for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
            params[layer.w_offset + k] = normal(rng);
        }
        std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(layer.b_offset), layer.out, 0.0);
    }
}

class Mlp final : public Problem {
public:
    Mlp(std::vector<std::size_t> sizes, std::size_t n, std::uint64_t seed, MlpTargets targets)
        : sizes_(std::move(sizes)), n_(n) {
        if (sizes_.size() < 3) {
            throw std::invalid_argument("mlp: need at least one hidden layer (three layer sizes)");
        }
        if (std::find(sizes_.begin(), sizes_.end(), std::size_t{0}) != sizes_.end() || n_ == 0) {
            throw std::invalid_argument("mlp: layer sizes and example count must be positive");
        }
        std::size_t offset = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            Layer layer{sizes_[l], sizes_[l + 1], offset, 0};
            offset += layer.in * layer.out;
            layer.b_offset = offset;
            offset += layer.out;
            layers_.push_back(layer);
        }
        dim_ = offset;

        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        inputs_.resize(n_ * sizes_.front());
        for (auto& x : inputs_) {
            x = normal(rng);
        }
        targets_.assign(n_ * sizes_.back(), 0.0);
        if (targets == MlpTargets::teacher) {
            std::vector<double> teacher(dim_);
            draw_layer_params(teacher, layers_, rng);
            std::vector<std::vector<double>> acts;
            for (std::size_t i = 0; i < n_; ++i) {
                forward(teacher, i, acts);
                std::copy(acts.back().begin(), acts.back().end(), targets_.begin() + static_cast<std::ptrdiff_t>(i * sizes_.back()));
            }
        }
    }

    std::string_view name() const noexcept override { return "mlp"; }
    std::size_t dim() const noexcept override { return dim_; }
    std::size_t dataset_size() const noexcept override { return n_; }

    std::vector<ParamBlock> blocks() const override {
        std::vector<ParamBlock> out;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            out.push_back({"W" + std::to_string(l + 1), layers_[l].w_offset, layers_[l].in * layers_[l].out});
            out.push_back({"b" + std::to_string(l + 1), layers_[l].b_offset, layers_[l].out});
        }
        return out;
    }

    double evaluate(std::span<const double> params, std::span<const std::size_t> batch,
                    std::span<double> grad) const override {
        check_sizes(*this, params, grad);
        check_batch(*this, batch);
        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<std::vector<double>> acts;
        std::vector<double> delta;
        std::vector<double> prev_delta;
        double loss = 0.0;

        auto accumulate = [&](std::size_t i) {
            forward(params, i, acts);
            const auto& out = acts.back();
            const double* target = targets_.data() + i * sizes_.back();
            delta.resize(out.size());
            for (std::size_t k = 0; k < out.size(); ++k) {
                delta[k] = out[k] - target[k];
                loss += 0.5 * delta[k] * delta[k];
            }
            for (std::size_t l = layers_.size(); l-- > 0;) {
                const Layer& layer = layers_[l];
                const auto& a_in = acts[l];
                for (std::size_t r = 0; r < layer.out; ++r) {
                    grad[layer.b_offset + r] += delta[r];
                    for (std::size_t c = 0; c < layer.in; ++c) {
                        grad[layer.w_offset + r * layer.in + c] += delta[r] * a_in[c];
                    }
                }
                if (l == 0) {
                    break;
                }
                // a_in = tanh(z) for hidden layers, so tanh'(z) = 1 - a_in^2
                prev_delta.assign(layer.in, 0.0);
                for (std::size_t r = 0; r < layer.out; ++r) {
                    for (std::size_t c = 0; c < layer.in; ++c) {
                        prev_delta[c] += params[layer.w_offset + r * layer.in + c] * delta[r];
                    }
                }
                for (std::size_t c = 0; c < layer.in; ++c) {
                    prev_delta[c] *= 1.0 - a_in[c] * a_in[c];
                }
                delta.swap(prev_delta);
            }
        };

        if (batch.empty()) {
            for (std::size_t i = 0; i < n_; ++i) {
                accumulate(i);
            }
        } else {
            for (std::size_t i : batch) {
                accumulate(i);
            }
        }
        return loss;
    }

    std::vector<double> initial_params(std::uint64_t seed) const override {
        std::vector<double> params(dim_);
        std::mt19937_64 rng(seed);
        draw_layer_params(params, layers_, rng);
        return params;
    }

private:
    // acts[0] is the input, acts[l + 1] the output of layer l.
    void forward(std::span<const double> params, std::size_t example, std::vector<std::vector<double>>& acts) const {
        acts.resize(layers_.size() + 1);
        const double* x = inputs_.data() + example * sizes_.front();
        acts[0].assign(x, x + sizes_.front());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& layer = layers_[l];
            auto& next = acts[l + 1];
            next.assign(layer.out, 0.0);
            for (std::size_t r = 0; r < layer.out; ++r) {
                double z = params[layer.b_offset + r];
                for (std::size_t c = 0; c < layer.in; ++c) {
                    z += params[layer.w_offset + r * layer.in + c] * acts[l][c];
                }
                next[r] = (l + 1 < layers_.size()) ? std::tanh(z) : z;
            }
        }
    }

    std::vector<std::size_t> sizes_;
    std::size_t n_;
    std::size_t dim_ = 0;
    std::vector<Layer> layers_;
    std::vector<double> inputs_;
    std::vector<double> targets_;
};

class FunctionProblem final : public Problem {
public:
    FunctionProblem(std::size_t dim, LossAndGradient fn, std::vector<double> start)
        : dim_(dim), fn_(std::move(fn)), start_(std::move(start)) {
        if (start_.empty()) {
            start_.assign(dim_, 0.0);
        }
        if (start_.size() != dim_) {
            throw std::invalid_argument("function problem: start point has the wrong size");
        }
    }

    std::string_view name() const noexcept override { return "function"; }
    std::size_t dim() const noexcept override { return dim_; }

    double evaluate(std::span<const double> params, std::span<const std::size_t>,
                    std::span<double> grad) const override {
        check_sizes(*this, params, grad);
        return fn_(params, grad);
    }

    std::vector<double> initial_params(std::uint64_t) const override { return start_; }

private:
    std::size_t dim_;
    LossAndGradient fn_;
    std::vector<double> start_;
};

}  // namespace

ProblemPtr make_quadratic(std::size_t dim, double condition_number, std::uint64_t seed) {
    if (dim == 0) {
        throw std::invalid_argument("quadratic: dim must be >= 1");
    }
    if (!(condition_number >= 1.0) || !std::isfinite(condition_number)) {
        throw std::invalid_argument("quadratic: condition number must be finite and >= 1");
    }
    std::vector<double> diag(dim, 1.0);
    if (dim > 1) {
        const double log_kappa = std::log(condition_number);
        for (std::size_t i = 0; i < dim; ++i) {
            diag[i] = std::exp(log_kappa * static_cast<double>(i) / static_cast<double>(dim - 1));
        }
        diag.back() = condition_number;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> minimizer(dim);
    for (auto& w : minimizer) {
        w = normal(rng);
    }
    return std::make_shared<Quadratic>(std::move(diag), std::move(minimizer));
}

ProblemPtr make_quadratic(std::vector<double> diagonal, std::vector<double> minimizer) {
    return std::make_shared<Quadratic>(std::move(diagonal), std::move(minimizer));
}

ProblemPtr make_rosenbrock() {
    return std::make_shared<Rosenbrock>();
}

std::pair<ProblemPtr, SyntheticDataset> make_logreg(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (d == 0 || n < d) {
        throw std::invalid_argument("logreg: need n >= d >= 1");
    }
    SyntheticDataset data;
    data.n = n;
    data.d = d;
    data.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    data.true_weights.resize(d);
    for (auto& w : data.true_weights) {
        w = normal(rng);
    }
    data.features.resize(n * d);
    for (auto& x : data.features) {
        x = normal(rng);
    }
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = data.row(i);
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            z += x[j] * data.true_weights[j];
        }
        data.labels[i] = uniform(rng) < sigmoid(z) ? 1 : 0;
    }
    auto problem = std::make_shared<LogisticRegression>(data);
    return {std::move(problem), std::move(data)};
}

ProblemPtr make_mlp(std::vector<std::size_t> layer_sizes, std::size_t n, std::uint64_t seed, MlpTargets targets) {
    return std::make_shared<Mlp>(std::move(layer_sizes), n, seed, targets);
}

ProblemPtr make_function_problem(std::size_t dim, LossAndGradient fn, std::vector<double> start) {
    return std::make_shared<FunctionProblem>(dim, std::move(fn), std::move(start));
}

std::vector<double> finite_diff_grad(const Problem& problem, std::span<const double> params, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_diff_grad: step must be > 0");
    }
    std::vector<double> point(params.begin(), params.end());
    std::vector<double> grad(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double w = point[i];
        const double step = h * std::max(1.0, std::abs(w));
        point[i] = w + step;
        const double up = problem.loss(point);
        point[i] = w - step;
        const double down = problem.loss(point);
        point[i] = w;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

double max_gradient_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) {
        throw std::invalid_argument("max_gradient_error: size mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1.0});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
    return worst;
}

}  // namespace adabayes::bench

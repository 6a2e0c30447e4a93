#include "adabayes/filter_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adabayes::analysis {

void SteadyStateQuery::validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw std::domain_error("steady-state query: sigma2 must be finite and > 0");
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw std::domain_error("steady-state query: eta must be finite and > 0");
    }
    if (!(g2 >= 0.0) || !std::isfinite(g2)) {
        throw std::domain_error("steady-state query: g2 must be finite and >= 0");
    }
    if (!(eta * eta / (2.0 * sigma2) < 1.0)) {
        throw std::domain_error("steady-state query: eta^2 / (2 sigma2) must be < 1");
    }
}

double QuadraticTerms::max_magnitude() const noexcept {
    return std::max({std::abs(quadratic), std::abs(linear), std::abs(constant)});
}

double steady_state_s_post(const SteadyStateQuery& q) {
    q.validate();
    const double half_precision = 0.5 / q.sigma2;
    return 1.0 / (half_precision + std::sqrt(half_precision * half_precision + q.g2 / (q.eta * q.eta)));
}

QuadraticTerms quadratic_terms(double s_post, const SteadyStateQuery& q) {
    if (!(s_post > 0.0)) {
        throw std::domain_error("quadratic_residual: s_post must be > 0");
    }
    const double precision = 1.0 / s_post;
    return {q.sigma2 * precision * precision, precision, q.g2 * q.sigma2 / (q.eta * q.eta)};
}

double quadratic_residual(double s_post, const SteadyStateQuery& q) {
    return quadratic_terms(s_post, q).residual();
}

double low_data_limit(const SteadyStateQuery& q) {
    q.validate();
    return q.sigma2;
}

double high_data_limit(const SteadyStateQuery& q) {
    q.validate();
    if (q.g2 == 0.0) {
        throw std::domain_error("high_data_limit: undefined for g2 = 0");
    }
    return q.eta / std::sqrt(q.g2);
}

std::vector<double> no_dynamics_s_post(double sigma2, std::span<const double> g2_partial_sums) {
    if (!(sigma2 > 0.0)) {
        throw std::domain_error("no_dynamics_s_post: sigma2 must be > 0");
    }
    if (g2_partial_sums.empty()) {
        return {sigma2};
    }
    std::vector<double> out;
    out.reserve(g2_partial_sums.size());
    const double prior_precision = 1.0 / sigma2;
    for (double sum : g2_partial_sums) {
        out.push_back(1.0 / (prior_precision + sum));
    }
    return out;
}

double sigma2_from_sgd(double eta_sgd, std::size_t batch_size) {
    if (!(eta_sgd > 0.0) || batch_size == 0) {
        throw std::domain_error("sigma2_from_sgd: need eta_sgd > 0 and batch_size >= 1");
    }
    return eta_sgd / static_cast<double>(batch_size);
}

std::vector<SweepRow> steady_state_sweep(double sigma2, double eta, std::span<const double> x_grid) {
    SteadyStateQuery base{sigma2, eta, 0.0};
    base.validate();

    std::vector<SweepRow> rows;
    rows.reserve(x_grid.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        const double x = x_grid[i];
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw std::domain_error("sweep row " + std::to_string(i) + ": x must be finite and > 0");
        }
        if (i > 0 && !(x > x_grid[i - 1])) {
            throw std::domain_error("sweep row " + std::to_string(i) + ": grid must be strictly increasing");
        }
        SteadyStateQuery q = base;
        const double root_g2 = eta / x;
        q.g2 = root_g2 * root_g2;
        rows.push_back({x, steady_state_s_post(q), sigma2, x});
    }
    return rows;
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2) {
        throw std::domain_error("log_grid: need 0 < lo < hi and at least two points");
    }
    std::vector<double> grid(points);
    const double a = std::log10(lo);
    const double step = (std::log10(hi) - a) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = std::pow(10.0, a + step * static_cast<double>(i));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

std::vector<double> default_sweep_grid(double sigma2) {
    return log_grid(sigma2 / 1e3, sigma2 * 1e3, 200);
}

}  // namespace adabayes::analysis

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adabayes::analysis {

/// Inputs to the steady-state posterior variance: prior variance, diffusion
/// width and the stationary mean-square gradient <g^2>.
struct SteadyStateQuery {
    double sigma2 = 1e-3;
    double eta = 1e-3;
    double g2 = 0.0;

    /// Throws std::domain_error unless sigma2 > 0, eta > 0, g2 >= 0 and
    /// eta^2 / (2 sigma2) < 1.
    void validate() const;
};

/// The three terms of sigma2 * P^2 - P - g2 * sigma2 / eta^2 at P = 1 / s_post.
struct QuadraticTerms {
    double quadratic = 0.0;
    double linear = 0.0;
    double constant = 0.0;

    double residual() const noexcept { return quadratic - linear - constant; }
    double max_magnitude() const noexcept;
};

/// Steady-state posterior variance of the AdaBayes recursion under a
/// stationary <g^2>:
///   1 / s = 1/(2 sigma2) + sqrt(1/(4 sigma2^2) + g2/eta^2).
/// Strictly positive and non-increasing in g2.
double steady_state_s_post(const SteadyStateQuery& q);

QuadraticTerms quadratic_terms(double s_post, const SteadyStateQuery& q);

/// Residual of the steady-state quadratic in the precision 1 / s_post.
/// Vanishes at steady_state_s_post(q).
double quadratic_residual(double s_post, const SteadyStateQuery& q);

/// Small-<g^2> (SGD-like) asymptote: sigma2.
double low_data_limit(const SteadyStateQuery& q);

/// Large-<g^2> (Adam-like) asymptote: eta / sqrt(g2). Domain error if g2 == 0.
double high_data_limit(const SteadyStateQuery& q);

/// Posterior variance without dynamics, 1 / (1/sigma2 + S_t), for each partial
/// sum S_t of squared gradients. An empty input yields {sigma2}.
std::vector<double> no_dynamics_s_post(double sigma2, std::span<const double> g2_partial_sums);

/// Prior variance calibrated from an SGD learning rate: eta_sgd / batch_size.
double sigma2_from_sgd(double eta_sgd, std::size_t batch_size);

struct SweepRow {
    double x = 0.0;       ///< eta / sqrt(<g^2>)
    double s_ss = 0.0;
    double s_low = 0.0;
    double s_high = 0.0;  ///< equals x
};

/// Evaluates the steady state and both asymptotes at every x = eta/sqrt(g2).
/// `x_grid` must be strictly positive and strictly increasing; violations
/// throw std::domain_error naming the offending row.
std::vector<SweepRow> steady_state_sweep(double sigma2, double eta, std::span<const double> x_grid);

/// `points` log-spaced values in [lo, hi], both endpoints included.
std::vector<double> log_grid(double lo, double hi, std::size_t points);

/// 200 log-spaced points over [sigma2 / 1e3, sigma2 * 1e3].
std::vector<double> default_sweep_grid(double sigma2);

}  // namespace adabayes::analysis

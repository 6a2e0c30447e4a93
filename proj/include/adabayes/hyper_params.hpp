#pragma once

#include <cstddef>

namespace adabayes {

/// Optimizer constants shared by all five step rules.
///
/// Every rule reads only the fields it needs: SGD uses eta_sgd, minibatch_size
/// and l2; Adam uses eta, eps and l2; AdamW uses eta, eps and lambda; the
/// filtering rules use eta, sigma2 and lambda and never touch eps.
struct HyperParams {
    double eta = 1e-3;               ///< Adam-scale learning rate, also the diffusion width
    double eta_sgd = 0.1;            ///< SGD learning rate (summed-loss convention)
    std::size_t minibatch_size = 1;  ///< B
    double sigma2 = 0.1;             ///< prior variance
    double lambda = 0.0;             ///< decoupled weight decay
    double l2 = 0.0;                 ///< coupled L2 coefficient on the mean loss (SGD/Adam only)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;               ///< Adam/AdamW denominator guard

    /// Standard defaults for a given minibatch size: eta = 1e-3, eta_sgd = 0.1,
    /// sigma2 = eta_sgd / B, lambda = 5e-5.
    static HyperParams defaults(std::size_t minibatch_size);

    /// Drift factor 1 - eta^2 / (2 sigma2) of the prior mean.
    double drift() const noexcept { return 1.0 - eta * eta / (2.0 * sigma2); }

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

}  // namespace adabayes
